//! Fixed-timestep simulator for a stand-alone photovoltaic + lead-acid battery
//! system.
//!
//! The crate is organised bottom-up:
//!
//! - [`pv_model`]: single-diode PV generator, I-V sweeps and a brute-force
//!   maximum-power-point oracle.
//! - [`battery_model`]: current-dependent capacity, coulomb-counting state of
//!   charge and the charge/discharge terminal-voltage laws.
//! - [`converter`]: quasi-static boost converter between the PV port and the
//!   DC bus.
//! - [`mppt`]: Perturb & Observe and Mamdani fuzzy MPPT controllers.
//! - [`supervisor`]: five-mode power management with SOC hysteresis.
//! - [`profiles`]: irradiance / temperature / load time series.
//! - [`sim_engine`]: the per-step pipeline, output records and energy ledger.
//! - [`config`]: the TOML configuration schema tying everything together.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery_model;
pub mod config;
pub mod converter;
pub mod error;
pub mod mppt;
pub mod profiles;
pub mod pv_model;
pub mod sim_engine;
mod solver;
pub mod supervisor;

pub use error::{Error, Result};
