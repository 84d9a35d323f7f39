//! Mamdani fuzzy MPPT controller.
//!
//! Inputs are the discrete P-V slope `E(k) = ΔP/ΔV` and its change
//! `CE(k) = E(k) - E(k-1)`, each divided by its universe half-width and
//! fuzzified with five triangular sets. Rules fire with `min`, outputs
//! aggregate with `max`, and the duty increment is the activation-weighted
//! mean of the output label centers.

use serde::{Deserialize, Serialize};

use super::MpptState;
use crate::{Error, Result};

/// Below this voltage change the slope is taken as zero.
pub const V_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FuzzyLabel {
    NB,
    NS,
    Z,
    PS,
    PB,
}

impl FuzzyLabel {
    pub const ALL: [FuzzyLabel; 5] = [
        FuzzyLabel::NB,
        FuzzyLabel::NS,
        FuzzyLabel::Z,
        FuzzyLabel::PS,
        FuzzyLabel::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// NB <-> PB, NS <-> PS, Z <-> Z.
    pub fn negate(self) -> Self {
        Self::ALL[4 - self.index()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FuzzyLabel::NB => "NB",
            FuzzyLabel::NS => "NS",
            FuzzyLabel::Z => "Z",
            FuzzyLabel::PS => "PS",
            FuzzyLabel::PB => "PB",
        }
    }
}

impl std::fmt::Display for FuzzyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

use FuzzyLabel::{NB, NS, PB, PS, Z};

/// Rule base, indexed `[E][CE]`.
pub const RULE_TABLE: [[FuzzyLabel; 5]; 5] = [
    [NB, NB, NS, NS, Z],
    [NB, NS, NS, Z, PS],
    [NS, NS, Z, PS, PS],
    [NS, Z, PS, PS, PB],
    [Z, PS, PS, PB, PB],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzyConfig {
    /// Half-width of the E universe [W/V].
    pub e_range: f64,
    /// Half-width of the CE universe [W/V].
    pub ce_range: f64,
    /// Half-width of the duty-increment output universe.
    pub dd_range: f64,
    /// Normalised label centers on [-1, 1], shared by all three universes.
    pub centers: [f64; 5],
    /// Sign mapping a voltage-raising command onto the duty cycle. With the
    /// bus pinned, `V_pv = V_bus (1 - D)`, so raising the PV voltage means
    /// lowering D: -1.
    pub duty_polarity: f64,
    /// Smallest duty change per iteration. Keeps the loop probing once it
    /// has settled; with a zero step the voltage never moves, E stays 0 and
    /// irradiance changes go unnoticed.
    pub min_step: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            e_range: 10.0,
            ce_range: 10.0,
            dd_range: 0.01,
            centers: [-1.0, -0.5, 0.0, 0.5, 1.0],
            duty_polarity: -1.0,
            min_step: 0.0005,
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("e_range", self.e_range),
            ("ce_range", self.ce_range),
            ("dd_range", self.dd_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{prefix}{name}"), "must be > 0"));
            }
        }
        let c = &self.centers;
        if c[2] != 0.0 || c.windows(2).any(|w| w[0] >= w[1]) || (0..5).any(|i| c[i] != -c[4 - i]) {
            return Err(Error::config(
                format!("{prefix}centers"),
                "must be strictly increasing and symmetric about Z = 0",
            ));
        }
        if !(self.min_step >= 0.0 && self.min_step <= self.dd_range) {
            return Err(Error::config(
                format!("{prefix}min_step"),
                "must lie in [0, dd_range]",
            ));
        }
        if self.duty_polarity != 1.0 && self.duty_polarity != -1.0 {
            return Err(Error::config(
                format!("{prefix}duty_polarity"),
                "must be 1 or -1",
            ));
        }
        Ok(())
    }

    fn output_centers(&self) -> [f64; 5] {
        self.centers.map(|c| c * self.dd_range)
    }
}

/// Slope `E` and its change `CE`; `E = 0` when `|ΔV| < V_EPSILON`.
pub fn compute_error_signals(
    p_now: f64,
    p_prev: f64,
    v_now: f64,
    v_prev: f64,
    e_prev: f64,
) -> (f64, f64) {
    let dv = v_now - v_prev;
    let e = if dv.abs() < V_EPSILON {
        0.0
    } else {
        (p_now - p_prev) / dv
    };
    (e, e - e_prev)
}

/// Triangular partition of unity over the five label centers; values beyond
/// the outer centers saturate to the outer label.
pub fn fuzzify(x: f64, centers: &[f64; 5]) -> [f64; 5] {
    let mut mu = [0.0; 5];
    if x <= centers[0] {
        mu[0] = 1.0;
        return mu;
    }
    if x >= centers[4] {
        mu[4] = 1.0;
        return mu;
    }
    for idx in 0..4 {
        let (lo, hi) = (centers[idx], centers[idx + 1]);
        if x <= hi {
            let upper = (x - lo) / (hi - lo);
            mu[idx] = 1.0 - upper;
            mu[idx + 1] = upper;
            break;
        }
    }
    mu
}

/// Min/max inference over [`RULE_TABLE`].
pub fn infer(mu_e: &[f64; 5], mu_ce: &[f64; 5]) -> [f64; 5] {
    let mut out = [0.0_f64; 5];
    for (i, row) in RULE_TABLE.iter().enumerate() {
        for (j, label) in row.iter().enumerate() {
            let firing = mu_e[i].min(mu_ce[j]);
            let slot = &mut out[label.index()];
            *slot = slot.max(firing);
        }
    }
    out
}

/// Activation-weighted mean of the output centers; 0 if nothing fired.
pub fn defuzzify(activations: &[f64; 5], centers: &[f64; 5]) -> f64 {
    let total: f64 = activations.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    activations
        .iter()
        .zip(centers)
        .map(|(a, c)| a * c)
        .sum::<f64>()
        / total
}

/// Crisp controller output for given error signals, before the duty
/// polarity is applied. Positive means "raise the PV voltage".
pub fn fuzzy_command(e: f64, ce: f64, config: &FuzzyConfig) -> f64 {
    let mu_e = fuzzify(e / config.e_range, &config.centers);
    let mu_ce = fuzzify(ce / config.ce_range, &config.centers);
    defuzzify(&infer(&mu_e, &mu_ce), &config.output_centers())
}

/// One fuzzy controller iteration.
pub fn flc_step(p_now: f64, v_now: f64, state: &MpptState, config: &FuzzyConfig) -> MpptState {
    let (e, ce) = compute_error_signals(p_now, state.p_prev, v_now, state.v_prev, state.e_prev);
    let mut step = config.duty_polarity * fuzzy_command(e, ce, config);
    if step.abs() < config.min_step {
        let sign = if step != 0.0 {
            step.signum()
        } else if state.direction < 0 {
            -1.0
        } else {
            1.0
        };
        step = sign * config.min_step;
    }
    let mut next = *state;
    next.d = state.clamp_duty(state.d + step);
    if step != 0.0 {
        next.direction = if step > 0.0 { 1 } else { -1 };
    }
    next.p_prev = p_now;
    next.v_prev = v_now;
    next.e_prev = e;
    next
}
