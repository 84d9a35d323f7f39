//! Single-diode photovoltaic generator model.
//!
//! Each panel is a photocurrent source in parallel with a diode and a shunt
//! resistance, behind a series resistance:
//!
//! ```text
//! I = I_ph - I_0 * (exp(q (V + R_s I) / (A N_s k T_j)) - 1) - (V + R_s I) / R_sh
//! ```
//!
//! The relation is implicit in `I`. The residual `rhs(I) - I` is strictly
//! decreasing in `I`, so a bracketed bisection/Newton solve always finds the
//! unique root. Arrays are exact series/parallel compositions of identical
//! panels: array voltage is split evenly across `n_panels_series`, array
//! current is `n_panels_parallel` times the string current.

use serde::{Deserialize, Serialize};

use crate::solver::solve_decreasing;
use crate::{Error, Result};

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// 0 °C in kelvin.
pub const KELVIN_OFFSET: f64 = 273.15;

const MAX_ITERATIONS: usize = 200;
const NEWTON_WIDTH: f64 = 1e-3;

/// Temperature law for the diode saturation current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationModel {
    /// `I_0 = i_0_ref` at every temperature.
    Constant,
    /// `I_0 = i_0_ref (T/T_ref)^3 exp(q E_g / (A k) (1/T_ref - 1/T))`.
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvPanelParams {
    /// Photocurrent at reference conditions [A].
    pub i_ph_ref: f64,
    /// Diode saturation current at reference conditions [A].
    pub i_0_ref: f64,
    /// Series resistance [Ω].
    pub r_s: f64,
    /// Shunt resistance [Ω].
    pub r_sh: f64,
    /// Diode ideality factor.
    pub a: f64,
    /// Cells in series per panel.
    pub n_s: u32,
    /// Elementary charge [C].
    pub q: f64,
    /// Boltzmann constant [J/K].
    pub k: f64,
    /// Reference irradiance [W/m²].
    pub g_ref: f64,
    /// Reference cell temperature [K].
    pub t_ref: f64,
    /// Short-circuit current temperature coefficient [A/K].
    pub k_i: f64,
    pub n_panels_series: u32,
    pub n_panels_parallel: u32,
    pub saturation: SaturationModel,
    /// Band gap used by [`SaturationModel::Cubic`] [eV].
    pub band_gap_ev: f64,
}

/// The default array: eight generic 80 W panels in parallel (about 640 W).
impl Default for PvPanelParams {
    fn default() -> Self {
        Self::generic_80w().with_array(1, 8)
    }
}

impl PvPanelParams {
    /// Generic 36-cell crystalline panel: about 80.3 W at 1000 W/m² and
    /// 25 °C, V_oc ≈ 21.6 V, I_sc ≈ 5 A. Single panel, no array.
    pub fn generic_80w() -> Self {
        Self {
            i_ph_ref: 5.0,
            i_0_ref: 7.8e-8,
            r_s: 0.2,
            r_sh: 300.0,
            a: 1.3,
            n_s: 36,
            q: ELEMENTARY_CHARGE,
            k: BOLTZMANN,
            g_ref: 1000.0,
            t_ref: 25.0 + KELVIN_OFFSET,
            k_i: 0.0025,
            n_panels_series: 1,
            n_panels_parallel: 1,
            saturation: SaturationModel::Constant,
            band_gap_ev: 1.12,
        }
    }

    /// Same panel with a different array layout.
    pub fn with_array(mut self, series: u32, parallel: u32) -> Self {
        self.n_panels_series = series;
        self.n_panels_parallel = parallel;
        self
    }

    /// Check the parameter invariants; errors name the offending key
    /// relative to `prefix` (e.g. `pv.r_sh`).
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |name: &str| format!("{prefix}{name}");
        let positive = [
            ("i_ph_ref", self.i_ph_ref),
            ("i_0_ref", self.i_0_ref),
            ("r_sh", self.r_sh),
            ("q", self.q),
            ("k", self.k),
            ("g_ref", self.g_ref),
            ("t_ref", self.t_ref),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    key(name),
                    format!("must be > 0, got {value}"),
                ));
            }
        }
        if !(self.r_s.is_finite() && self.r_s >= 0.0) {
            return Err(Error::config(key("r_s"), "must be >= 0"));
        }
        if !(1.0..=2.0).contains(&self.a) {
            return Err(Error::config(
                key("a"),
                format!("must lie in [1, 2], got {}", self.a),
            ));
        }
        if !self.k_i.is_finite() {
            return Err(Error::config(key("k_i"), "must be finite"));
        }
        for (name, value) in [
            ("n_s", self.n_s),
            ("n_panels_series", self.n_panels_series),
            ("n_panels_parallel", self.n_panels_parallel),
        ] {
            if value < 1 {
                return Err(Error::config(key(name), "must be >= 1"));
            }
        }
        Ok(())
    }

    /// `A N_s k T / q`, the panel-level modified thermal voltage [V].
    pub fn thermal_voltage(&self, t_j: f64) -> f64 {
        self.a * f64::from(self.n_s) * self.k * t_j / self.q
    }

    /// Diode saturation current at junction temperature `t_j` [A].
    pub fn saturation_current(&self, t_j: f64) -> f64 {
        match self.saturation {
            SaturationModel::Constant => self.i_0_ref,
            SaturationModel::Cubic => {
                let ratio = t_j / self.t_ref;
                let activation =
                    self.q * self.band_gap_ev / (self.a * self.k) * (1.0 / self.t_ref - 1.0 / t_j);
                self.i_0_ref * ratio.powi(3) * activation.exp()
            }
        }
    }

    fn series(&self) -> f64 {
        f64::from(self.n_panels_series)
    }

    fn parallel(&self) -> f64 {
        f64::from(self.n_panels_parallel)
    }
}

/// One electrical operating point of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvOperatingPoint {
    pub v_pv: f64,
    pub i_pv: f64,
    /// Always `v_pv * i_pv`.
    pub p_pv: f64,
    pub g: f64,
    pub t_j: f64,
}

impl PvOperatingPoint {
    pub fn new(v_pv: f64, i_pv: f64, g: f64, t_j: f64) -> Self {
        Self {
            v_pv,
            i_pv,
            p_pv: v_pv * i_pv,
            g,
            t_j,
        }
    }
}

/// The location of the maximum power point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPowerPoint {
    pub v_mpp: f64,
    pub p_mpp: f64,
}

/// Panel-level coefficients of the implicit equation at fixed (G, T_j).
#[derive(Debug, Clone, Copy)]
struct PanelEquation {
    i_ph: f64,
    i_0: f64,
    v_t: f64,
    r_s: f64,
    r_sh: f64,
}

impl PanelEquation {
    fn new(g: f64, t_j: f64, params: &PvPanelParams) -> Result<Self> {
        Ok(Self {
            i_ph: photo_current(g, t_j, params)?,
            i_0: params.saturation_current(t_j),
            v_t: params.thermal_voltage(t_j),
            r_s: params.r_s,
            r_sh: params.r_sh,
        })
    }

    /// `rhs(v, i) - i`; strictly decreasing in `i`.
    fn residual(&self, v: f64, i: f64) -> f64 {
        let vd = v + self.r_s * i;
        self.i_ph - self.i_0 * (vd / self.v_t).exp_m1() - vd / self.r_sh - i
    }

    fn d_residual_di(&self, v: f64, i: f64) -> f64 {
        let vd = v + self.r_s * i;
        -self.i_0 * self.r_s / self.v_t * (vd / self.v_t).exp() - self.r_s / self.r_sh - 1.0
    }

    fn solve_current(&self, v: f64) -> Result<f64> {
        let f = |i: f64| self.residual(v, i);
        let mut lo = -10.0 * self.i_0;
        let hi = self.i_ph + 1.0;
        // Above V_oc the root is negative and may sit below the nominal
        // lower bracket; widen until the sign is right.
        let mut widenings = 0;
        while f(lo) < 0.0 {
            lo = 2.0 * lo - 1.0;
            widenings += 1;
            if widenings > 64 {
                return Err(Error::NoConvergence {
                    iterations: widenings,
                    residual: f(lo),
                });
            }
        }
        solve_decreasing(
            f,
            |i| self.d_residual_di(v, i),
            lo,
            hi,
            NEWTON_WIDTH,
            MAX_ITERATIONS,
        )
    }

    /// Zero-current voltage: root of `I_ph - I_0 (exp(V/V_t) - 1) - V/R_sh`.
    fn open_circuit_voltage(&self) -> Result<f64> {
        if self.i_ph <= 0.0 {
            return Ok(0.0);
        }
        let f = |v: f64| self.residual(v, 0.0);
        let df = |v: f64| -self.i_0 / self.v_t * (v / self.v_t).exp() - 1.0 / self.r_sh;
        // At this voltage the diode alone carries I_ph, so f(hi) = -hi/R_sh < 0.
        let hi = self.v_t * (self.i_ph / self.i_0).ln_1p();
        solve_decreasing(f, df, 0.0, hi, NEWTON_WIDTH, MAX_ITERATIONS)
    }
}

fn check_environment(g: f64, t_j: f64) -> Result<()> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!(
            "irradiance must be >= 0 W/m², got {g}"
        )));
    }
    if !(t_j > 0.0 && t_j.is_finite()) {
        return Err(Error::Domain(format!(
            "junction temperature must be > 0 K, got {t_j}"
        )));
    }
    Ok(())
}

/// Panel photocurrent, linear in irradiance with a temperature coefficient.
pub fn photo_current(g: f64, t_j: f64, params: &PvPanelParams) -> Result<f64> {
    check_environment(g, t_j)?;
    Ok(params.i_ph_ref * (g / params.g_ref) * (1.0 + params.k_i * (t_j - params.t_ref)))
}

/// Residual of the implicit diode equation at an array operating point,
/// expressed per panel [A].
pub fn diode_residual(
    v_pv: f64,
    i_pv: f64,
    g: f64,
    t_j: f64,
    params: &PvPanelParams,
) -> Result<f64> {
    let eq = PanelEquation::new(g, t_j, params)?;
    Ok(eq.residual(v_pv / params.series(), i_pv / params.parallel()))
}

/// Array current at array voltage `v_pv`.
///
/// The returned value is the exact root of the diode equation and may be
/// slightly negative above V_oc; callers that model a blocking diode clamp it.
pub fn solve_operating_current(v_pv: f64, g: f64, t_j: f64, params: &PvPanelParams) -> Result<f64> {
    if !(v_pv >= 0.0 && v_pv.is_finite()) {
        return Err(Error::Domain(format!(
            "PV voltage must be >= 0 V, got {v_pv}"
        )));
    }
    let eq = PanelEquation::new(g, t_j, params)?;
    let i_panel = eq.solve_current(v_pv / params.series())?;
    Ok(i_panel * params.parallel())
}

/// Array open-circuit voltage [V].
pub fn open_circuit_voltage(g: f64, t_j: f64, params: &PvPanelParams) -> Result<f64> {
    let eq = PanelEquation::new(g, t_j, params)?;
    Ok(eq.open_circuit_voltage()? * params.series())
}

/// Evenly spaced I-V sweep from short circuit to open circuit.
///
/// The last point is pinned to `(V_oc, 0)`.
pub fn iv_sweep(
    g: f64,
    t_j: f64,
    n_points: usize,
    params: &PvPanelParams,
) -> Result<Vec<PvOperatingPoint>> {
    if n_points < 2 {
        return Err(Error::Domain(format!(
            "sweep needs at least 2 points, got {n_points}"
        )));
    }
    let v_oc = open_circuit_voltage(g, t_j, params)?;
    let last = n_points - 1;
    (0..n_points)
        .map(|idx| {
            if idx == last {
                return Ok(PvOperatingPoint::new(v_oc, 0.0, g, t_j));
            }
            let v = v_oc * idx as f64 / last as f64;
            let i = solve_operating_current(v, g, t_j, params)?;
            Ok(PvOperatingPoint::new(v, i, g, t_j))
        })
        .collect()
}

/// Brute-force maximum power point: scan `[0, V_oc]` at `resolution` volts,
/// then refine around the best grid point with golden-section search.
pub fn mpp_oracle(
    g: f64,
    t_j: f64,
    params: &PvPanelParams,
    resolution: f64,
) -> Result<MaxPowerPoint> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Domain(format!(
            "resolution must be > 0, got {resolution}"
        )));
    }
    let v_oc = open_circuit_voltage(g, t_j, params)?;
    if v_oc <= 0.0 {
        return Ok(MaxPowerPoint {
            v_mpp: 0.0,
            p_mpp: 0.0,
        });
    }
    let power = |v: f64| -> Result<f64> { Ok(v * solve_operating_current(v, g, t_j, params)?) };

    let n = (v_oc / resolution).ceil() as usize;
    let grid_v = |idx: usize| (idx as f64 * resolution).min(v_oc);
    let mut best_idx = 0;
    let mut best_p = f64::NEG_INFINITY;
    for idx in 0..=n {
        let p = power(grid_v(idx))?;
        if p > best_p {
            best_p = p;
            best_idx = idx;
        }
    }

    let mut lo = grid_v(best_idx.saturating_sub(1));
    let mut hi = grid_v((best_idx + 1).min(n));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut p1 = power(x1)?;
    let mut p2 = power(x2)?;
    while hi - lo > 1e-10 * v_oc.max(1.0) {
        if p1 < p2 {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + inv_phi * (hi - lo);
            p2 = power(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - inv_phi * (hi - lo);
            p1 = power(x1)?;
        }
    }
    let (mut v_mpp, mut p_mpp) = if p1 >= p2 { (x1, p1) } else { (x2, p2) };
    if best_p > p_mpp {
        v_mpp = grid_v(best_idx);
        p_mpp = best_p;
    }
    Ok(MaxPowerPoint { v_mpp, p_mpp })
}
