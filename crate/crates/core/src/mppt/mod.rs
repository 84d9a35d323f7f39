//! Maximum power point tracking.
//!
//! Two interchangeable sampled-data controllers act on the boost converter
//! duty cycle: hill-climbing Perturb & Observe and a Mamdani fuzzy
//! controller driven by the discrete P-V slope and its change. Both consume
//! one `(P, V)` measurement per call and return the next controller state.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod bench;
pub mod fuzzy;
mod perturb_observe;

pub use fuzzy::{
    compute_error_signals, defuzzify, flc_step, fuzzify, fuzzy_command, infer, FuzzyConfig,
    FuzzyLabel, RULE_TABLE,
};
pub use perturb_observe::po_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MpptKind {
    Po,
    Flc,
}

impl MpptKind {
    pub fn name(self) -> &'static str {
        match self {
            MpptKind::Po => "po",
            MpptKind::Flc => "flc",
        }
    }
}

impl std::str::FromStr for MpptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "po" => Ok(MpptKind::Po),
            "flc" => Ok(MpptKind::Flc),
            other => Err(Error::config(
                "mppt",
                format!("unknown controller `{other}` (expected po|flc)"),
            )),
        }
    }
}

/// Controller memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptState {
    /// P(k-1) [W].
    pub p_prev: f64,
    /// V(k-1) [V].
    pub v_prev: f64,
    /// E(k-1) [W/V].
    pub e_prev: f64,
    pub d: f64,
    pub d_max: f64,
    /// P&O perturbation step.
    pub delta_d: f64,
    /// Sign of the last duty perturbation.
    pub direction: i8,
}

impl MpptState {
    pub fn new(d: f64, d_max: f64, delta_d: f64) -> Self {
        Self {
            p_prev: 0.0,
            v_prev: 0.0,
            e_prev: 0.0,
            d: d.clamp(0.0, d_max),
            d_max,
            delta_d,
            direction: 1,
        }
    }

    pub(crate) fn clamp_duty(&self, d: f64) -> f64 {
        d.clamp(0.0, self.d_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpptConfig {
    pub delta_d: f64,
    /// Controller sampling period [s].
    pub t_mppt_s: f64,
    pub initial_duty: f64,
    pub fuzzy: FuzzyConfig,
}

impl Default for MpptConfig {
    fn default() -> Self {
        Self {
            delta_d: 0.005,
            t_mppt_s: 0.1,
            initial_duty: 0.5,
            fuzzy: FuzzyConfig::default(),
        }
    }
}

impl MpptConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.delta_d > 0.0 && self.delta_d < 1.0) {
            return Err(Error::config(
                format!("{prefix}delta_d"),
                "must lie in (0, 1)",
            ));
        }
        if !(self.t_mppt_s > 0.0 && self.t_mppt_s.is_finite()) {
            return Err(Error::config(format!("{prefix}t_mppt_s"), "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.initial_duty) {
            return Err(Error::config(
                format!("{prefix}initial_duty"),
                "must lie in [0, 1)",
            ));
        }
        self.fuzzy.validate(&format!("{prefix}fuzzy."))
    }
}

/// A configured controller.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    PerturbObserve,
    Fuzzy(FuzzyConfig),
}

impl Controller {
    pub fn new(kind: MpptKind, config: &MpptConfig) -> Self {
        match kind {
            MpptKind::Po => Controller::PerturbObserve,
            MpptKind::Flc => Controller::Fuzzy(config.fuzzy.clone()),
        }
    }

    pub fn kind(&self) -> MpptKind {
        match self {
            Controller::PerturbObserve => MpptKind::Po,
            Controller::Fuzzy(_) => MpptKind::Flc,
        }
    }

    pub fn step(&self, p_now: f64, v_now: f64, state: &MpptState) -> MpptState {
        match self {
            Controller::PerturbObserve => po_step(p_now, v_now, state),
            Controller::Fuzzy(cfg) => flc_step(p_now, v_now, state, cfg),
        }
    }
}
