//! Desk-scale tracking bench: one controller driving the array through the
//! boost converter into a fixed bus voltage, one controller step per sample,
//! with the brute-force MPP oracle as referee.

use serde::{Deserialize, Serialize};

use super::{Controller, MpptConfig, MpptState};
use crate::converter::{pv_voltage, ConverterState};
use crate::pv_model::{mpp_oracle, solve_operating_current, PvPanelParams, KELVIN_OFFSET};
use crate::{Error, Result};

/// Oracle grid resolution [V].
const ORACLE_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskSegment {
    pub steps: usize,
    /// Irradiance [W/m²].
    pub g: f64,
    /// Cell temperature [°C].
    pub t_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskScenario {
    /// Pinned bus voltage [V].
    pub bus_v: f64,
    pub segments: Vec<DeskSegment>,
}

impl Default for DeskScenario {
    fn default() -> Self {
        Self::constant(1000.0, 25.0, 500)
    }
}

impl DeskScenario {
    pub fn constant(g: f64, t_c: f64, steps: usize) -> Self {
        Self {
            bus_v: 24.0,
            segments: vec![DeskSegment { steps, g, t_c }],
        }
    }

    pub fn total_steps(&self) -> usize {
        self.segments.iter().map(|s| s.steps).sum()
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.bus_v > 0.0 && self.bus_v.is_finite()) {
            return Err(Error::config(format!("{prefix}bus_v"), "must be > 0"));
        }
        if self.segments.is_empty() {
            return Err(Error::config(
                format!("{prefix}segments"),
                "at least one segment required",
            ));
        }
        for (idx, seg) in self.segments.iter().enumerate() {
            if seg.steps < 2 {
                return Err(Error::config(
                    format!("{prefix}segments[{idx}].steps"),
                    "must be >= 2",
                ));
            }
            if !(seg.g >= 0.0 && seg.g.is_finite()) {
                return Err(Error::config(
                    format!("{prefix}segments[{idx}].g"),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeskSample {
    pub step: usize,
    pub segment: usize,
    pub g: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub p_pv: f64,
    /// Duty cycle in force while this sample was taken.
    pub d: f64,
}

/// Run `controller` through every segment of `scenario`.
pub fn run_desk(
    controller: &Controller,
    mppt: &MpptConfig,
    pv: &PvPanelParams,
    converter: &ConverterState,
    scenario: &DeskScenario,
) -> Result<Vec<DeskSample>> {
    let mut state = MpptState::new(mppt.initial_duty, converter.d_max, mppt.delta_d);
    let mut samples = Vec::with_capacity(scenario.total_steps());
    let mut step = 0;
    for (segment, seg) in scenario.segments.iter().enumerate() {
        let t_j = seg.t_c + KELVIN_OFFSET;
        for _ in 0..seg.steps {
            let v = pv_voltage(scenario.bus_v, state.d);
            let i = solve_operating_current(v, seg.g, t_j, pv)?.max(0.0);
            let p = v * i;
            samples.push(DeskSample {
                step,
                segment,
                g: seg.g,
                v_pv: v,
                i_pv: i,
                p_pv: p,
                d: state.d,
            });
            state = controller.step(p, v, &state);
            step += 1;
        }
    }
    Ok(samples)
}

/// Steady-state tracking figures for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSummary {
    pub segment: usize,
    pub p_mpp: f64,
    pub mean_p: f64,
    /// `mean_p / p_mpp`; `None` when the oracle power is zero.
    pub efficiency: Option<f64>,
    /// Peak-to-peak power over the steady-state window [W].
    pub ripple: f64,
}

/// Summarise each segment over its second half, taken as steady state.
pub fn summarize(
    samples: &[DeskSample],
    pv: &PvPanelParams,
    scenario: &DeskScenario,
) -> Result<Vec<SegmentSummary>> {
    let mut out = Vec::with_capacity(scenario.segments.len());
    for (segment, seg) in scenario.segments.iter().enumerate() {
        let in_segment: Vec<&DeskSample> =
            samples.iter().filter(|s| s.segment == segment).collect();
        let window = &in_segment[in_segment.len() / 2..];
        let p_mpp = mpp_oracle(seg.g, seg.t_c + KELVIN_OFFSET, pv, ORACLE_RESOLUTION)?.p_mpp;
        let mean_p = window.iter().map(|s| s.p_pv).sum::<f64>() / window.len() as f64;
        let max = window
            .iter()
            .map(|s| s.p_pv)
            .fold(f64::NEG_INFINITY, f64::max);
        let min = window.iter().map(|s| s.p_pv).fold(f64::INFINITY, f64::min);
        out.push(SegmentSummary {
            segment,
            p_mpp,
            mean_p,
            efficiency: (p_mpp > 0.0).then(|| mean_p / p_mpp),
            ripple: max - min,
        });
    }
    Ok(out)
}
