//! Quasi-static boost converter between the PV array and the DC bus.
//!
//! `V_out = V_pv / (1 - D)`, `I_out = η I_pv (1 - D)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverterState {
    /// Duty cycle.
    pub d: f64,
    /// Upper duty clamp; keeps away from the D = 1 singularity.
    pub d_max: f64,
    /// Flat efficiency in (0, 1].
    pub eta: f64,
}

impl Default for ConverterState {
    fn default() -> Self {
        Self {
            d: 0.0,
            d_max: 0.95,
            eta: 1.0,
        }
    }
}

impl ConverterState {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.d_max >= 0.0 && self.d_max < 1.0) {
            return Err(Error::config(
                format!("{prefix}d_max"),
                "must lie in [0, 1)",
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("{prefix}eta"), "must lie in (0, 1]"));
        }
        if !(0.0..=self.d_max).contains(&self.d) {
            return Err(Error::config(
                format!("{prefix}d"),
                "must lie in [0, d_max]",
            ));
        }
        Ok(())
    }

    pub fn with_duty(self, d: f64) -> Self {
        Self { d, ..self }
    }
}

/// Bus-side voltage and current for a PV-side operating point.
pub fn boost_output(v_pv: f64, i_pv: f64, state: &ConverterState) -> Result<(f64, f64)> {
    if !(state.d >= 0.0 && state.d <= state.d_max && state.d_max < 1.0) {
        return Err(Error::Domain(format!(
            "duty cycle {} outside [0, {}]",
            state.d, state.d_max
        )));
    }
    let off = 1.0 - state.d;
    Ok((v_pv / off, state.eta * i_pv * off))
}

/// Duty cycle that maps `v_pv` onto a pinned bus voltage, clamped to
/// `[0, d_max]`.
pub fn duty_for_bus(v_pv: f64, v_bus: f64, d_max: f64) -> Result<f64> {
    if !(v_pv > 0.0) {
        return Err(Error::Domain(format!(
            "PV voltage must be > 0 V, got {v_pv}"
        )));
    }
    Ok((1.0 - v_pv / v_bus).clamp(0.0, d_max))
}

/// PV-side voltage imposed by a pinned bus at duty `d`.
pub fn pv_voltage(v_bus: f64, d: f64) -> f64 {
    v_bus * (1.0 - d)
}
