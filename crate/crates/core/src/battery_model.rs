//! Lead-acid battery bank: current-dependent capacity, coulomb-counting state
//! of charge and empirical charge/discharge terminal-voltage laws.
//!
//! Sign convention: positive bank current discharges the battery.
//!
//! The per-string laws ([`capacity`], [`discharge_voltage`],
//! [`charge_voltage`]) take the string current; bank-level helpers split the
//! bank current evenly over `n_parallel` identical strings.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowest SOC at which the discharge law is evaluated.
pub const SOC_FLOOR: f64 = 0.005;
/// Highest SOC at which the charge law is evaluated.
pub const SOC_CEILING: f64 = 0.995;

const FIXED_POINT_MAX_ITER: usize = 50;
const FIXED_POINT_DAMPING: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Rated 10-hour capacity of one string [Ah].
    pub c_10: f64,
    /// Cells in series per string.
    pub n_serial: u32,
    /// Strings in parallel.
    pub n_parallel: u32,
    /// Internal resistance per cell [Ω]; only used by [`thevenin_voltage`].
    pub r_bat: f64,
    /// Open-circuit cell EMF [V]; only used by [`thevenin_voltage`].
    pub e_b: f64,
    /// Accumulator heating relative to 25 °C [°C].
    pub delta_t: f64,
    /// Numerator coefficient of the capacity law (1.76; the classical
    /// CIEMAT value is 1.67).
    pub capacity_coefficient: f64,
    /// Exponent of `|I|` in the discharge overvoltage term.
    pub discharge_current_exponent: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            c_10: 400.0,
            n_serial: 12,
            n_parallel: 1,
            r_bat: 0.005,
            e_b: 2.0,
            delta_t: 0.0,
            capacity_coefficient: 1.76,
            discharge_current_exponent: 1.3,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |name: &str| format!("{prefix}{name}");
        if !(self.c_10.is_finite() && self.c_10 > 0.0) {
            return Err(Error::config(key("c_10"), "must be > 0"));
        }
        if self.n_serial < 1 {
            return Err(Error::config(key("n_serial"), "must be >= 1"));
        }
        if self.n_parallel < 1 {
            return Err(Error::config(key("n_parallel"), "must be >= 1"));
        }
        if !(self.r_bat.is_finite() && self.r_bat >= 0.0) {
            return Err(Error::config(key("r_bat"), "must be >= 0"));
        }
        if !(self.capacity_coefficient.is_finite() && self.capacity_coefficient > 0.0) {
            return Err(Error::config(key("capacity_coefficient"), "must be > 0"));
        }
        if !self.discharge_current_exponent.is_finite() {
            return Err(Error::config(
                key("discharge_current_exponent"),
                "must be finite",
            ));
        }
        // The capacity law must stay positive.
        if 1.0 + 0.005 * self.delta_t <= 0.0 {
            return Err(Error::config(key("delta_t"), "must be > -200"));
        }
        Ok(())
    }

    /// The 10-hour rate current `C_10 / 10 h` [A].
    pub fn i_10(&self) -> f64 {
        self.c_10 / 10.0
    }

    fn serial(&self) -> f64 {
        f64::from(self.n_serial)
    }

    fn parallel(&self) -> f64 {
        f64::from(self.n_parallel)
    }

    /// Bank capacity at bank discharge current magnitude `i_bank` [Ah].
    pub fn bank_capacity(&self, i_bank: f64) -> f64 {
        self.parallel() * capacity(i_bank.abs() / self.parallel(), self.delta_t, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Charging,
    Discharging,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    /// Extracted charge of the whole bank [Ah].
    pub q: f64,
    /// Bank capacity used for the last SOC evaluation [Ah].
    pub capacity: f64,
    pub mode_flag: Regime,
    /// Last non-idle regime; selects the open-circuit branch at zero current.
    pub last_active: Regime,
    /// Number of times `q` or `soc` had to be clamped.
    pub clamp_events: u32,
}

impl BatteryState {
    /// Bank at rest with the given SOC, referenced to the zero-current capacity.
    pub fn from_soc(soc: f64, params: &BatteryParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::Domain(format!("soc must lie in [0, 1], got {soc}")));
        }
        let capacity = params.bank_capacity(0.0);
        Ok(Self {
            soc,
            q: (1.0 - soc) * capacity,
            capacity,
            mode_flag: Regime::Idle,
            last_active: Regime::Discharging,
            clamp_events: 0,
        })
    }
}

/// String capacity at discharge current `i_bat` [Ah]:
/// `C_10 · 1.76 (1 + 0.005 ΔT) / (1 + 0.67 I/I_10)`.
pub fn capacity(i_bat: f64, delta_t: f64, params: &BatteryParams) -> f64 {
    params.c_10 * params.capacity_coefficient * (1.0 + 0.005 * delta_t)
        / (1.0 + 0.67 * (i_bat / params.i_10()))
}

/// Coulomb-counting update over `dt` hours with signed bank current.
///
/// The capacity is re-evaluated at `|i_bat|` whenever current flows; at rest
/// the capacity of the previous update is kept so that SOC does not jump
/// when the battery is merely disconnected.
pub fn soc_update(
    state: &BatteryState,
    i_bat: f64,
    dt: f64,
    params: &BatteryParams,
) -> Result<BatteryState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be > 0 h, got {dt}")));
    }
    let mut next = *state;
    let mut q = state.q + i_bat * dt;
    if q < 0.0 {
        q = 0.0;
        next.clamp_events += 1;
    }
    let regime = regime_of(i_bat);
    if regime != Regime::Idle {
        next.capacity = params.bank_capacity(i_bat);
        next.last_active = regime;
    }
    let raw = 1.0 - q / next.capacity;
    let soc = raw.clamp(0.0, 1.0);
    if soc != raw {
        next.clamp_events += 1;
    }
    next.q = q;
    next.soc = soc;
    next.mode_flag = regime;
    Ok(next)
}

fn regime_of(i_bat: f64) -> Regime {
    if i_bat > 0.0 {
        Regime::Discharging
    } else if i_bat < 0.0 {
        Regime::Charging
    } else {
        Regime::Idle
    }
}

/// String terminal voltage while discharging at `i_bat` amperes [V].
pub fn discharge_voltage(
    soc: f64,
    i_bat: f64,
    delta_t: f64,
    params: &BatteryParams,
) -> Result<f64> {
    if !(soc > SOC_FLOOR) || soc > 1.0 {
        return Err(Error::SingularityGuard {
            soc,
            law: "discharge",
        });
    }
    let i = i_bat.abs();
    let overvoltage = (i / params.c_10)
        * (4.0 / (1.0 + i.powf(params.discharge_current_exponent)) + 0.27 / soc.powf(1.5) + 0.02)
        * (1.0 - 0.007 * delta_t);
    Ok(params.serial() * ((1.965 + 0.12 * soc) - overvoltage))
}

/// String terminal voltage while charging at `i_bat` amperes [V].
pub fn charge_voltage(soc: f64, i_bat: f64, delta_t: f64, params: &BatteryParams) -> Result<f64> {
    if !(soc < SOC_CEILING) || soc < 0.0 {
        return Err(Error::SingularityGuard { soc, law: "charge" });
    }
    let i = i_bat.abs();
    let overvoltage = (i / params.c_10)
        * (6.0 / (1.0 + i.powf(0.86)) + 0.48 / (1.0 - soc).powf(1.2) + 0.036)
        * (1.0 - 0.025 * delta_t);
    Ok(params.serial() * ((2.0 + 0.16 * soc) + overvoltage))
}

/// Bank terminal voltage at signed bank current.
///
/// Zero current evaluates the open-circuit branch of the last active regime,
/// so the charge/discharge hysteresis gap is preserved rather than smoothed.
pub fn terminal_voltage(state: &BatteryState, i_bat: f64, params: &BatteryParams) -> Result<f64> {
    let i_string = i_bat.abs() / params.parallel();
    let regime = match regime_of(i_bat) {
        Regime::Idle => state.last_active,
        r => r,
    };
    match regime {
        Regime::Charging => charge_voltage(state.soc, i_string, params.delta_t, params),
        _ => discharge_voltage(state.soc, i_string, params.delta_t, params),
    }
}

/// Zero-current terminal voltage on the branch of the last active regime.
/// Unlike [`terminal_voltage`] this is finite over the whole SOC range.
pub fn open_circuit_voltage(state: &BatteryState, params: &BatteryParams) -> f64 {
    let per_cell = match state.last_active {
        Regime::Charging => 2.0 + 0.16 * state.soc,
        _ => 1.965 + 0.12 * state.soc,
    };
    params.serial() * per_cell
}

/// Generic Thevenin form `n_serial (E_b - R_bat I_string)`.
pub fn thevenin_voltage(i_bat: f64, params: &BatteryParams) -> f64 {
    params.serial() * (params.e_b - params.r_bat * i_bat / params.parallel())
}

/// Signed bank current that delivers `p_bat` watts at the terminals
/// (positive = discharge), solving `P = I · V(I)` by damped fixed-point
/// iteration. Converged when `|P - I V(I)| <= 1e-6 max(1, |P|)`.
pub fn current_for_power(state: &BatteryState, p_bat: f64, params: &BatteryParams) -> Result<f64> {
    if p_bat == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-6 * p_bat.abs().max(1.0);
    let voltage = |i: f64| -> Result<f64> {
        let v = terminal_voltage(state, i, params)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Domain(format!(
                "battery cannot deliver {p_bat} W (terminal voltage {v} V)"
            )))
        }
    };
    let mut i = p_bat / voltage(0.0_f64.copysign(p_bat))?;
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let v = voltage(i)?;
        residual = p_bat - i * v;
        if residual.abs() <= tol {
            return Ok(i);
        }
        i = (1.0 - FIXED_POINT_DAMPING) * i + FIXED_POINT_DAMPING * p_bat / v;
        if !i.is_finite() || i.signum() != p_bat.signum() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cell() -> BatteryParams {
        BatteryParams {
            c_10: 100.0,
            n_serial: 1,
            ..BatteryParams::default()
        }
    }

    #[test]
    fn capacity_at_ten_hour_rate() {
        let p = cell();
        assert_relative_eq!(
            capacity(p.i_10(), 0.0, &p),
            1.76 * 100.0 / 1.67,
            max_relative = 1e-15
        );
        assert_relative_eq!(capacity(p.i_10(), 0.0, &p) / p.c_10, 1.0539, epsilon = 1e-4);
        assert_eq!(capacity(0.0, 0.0, &p), 1.76 * p.c_10);
        assert!(capacity(2.0 * p.i_10(), 0.0, &p) < capacity(p.i_10(), 0.0, &p));
        assert!(capacity(5.0, 10.0, &p) > capacity(5.0, 0.0, &p));
    }

    #[test]
    fn full_battery_at_rest() {
        let p = cell();
        let s = BatteryState::from_soc(1.0, &p).unwrap();
        assert_eq!(s.q, 0.0);
        let s = soc_update(&s, 0.0, 1.0, &p).unwrap();
        assert_eq!(s.soc, 1.0);
        assert_eq!(s.mode_flag, Regime::Idle);
    }

    #[test]
    fn linear_coulomb_counting_on_charge() {
        let p = cell();
        let mut s = BatteryState::from_soc(1.0, &p).unwrap();
        s.q = 5.0;
        let s = soc_update(&s, -1.0, 2.0, &p).unwrap();
        assert_eq!(s.q, 3.0);
        assert_eq!(s.mode_flag, Regime::Charging);
    }

    #[test]
    fn discharge_to_empty_at_matched_current() {
        // Oracle: bisect for the current I with I * T = C(I), T = 10 h.
        let p = cell();
        let hours = 10.0;
        let (mut lo, mut hi) = (1e-6, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * hours < capacity(mid, 0.0, &p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let current = 0.5 * (lo + hi);
        let mut s = BatteryState::from_soc(1.0, &p).unwrap();
        let steps = 3600;
        for _ in 0..steps {
            s = soc_update(&s, current, hours / steps as f64, &p).unwrap();
        }
        assert!(s.soc.abs() < 1e-9, "soc = {}", s.soc);
    }

    #[test]
    fn soc_clamps_are_counted() {
        let p = cell();
        let s = BatteryState::from_soc(1.0, &p).unwrap();
        let s = soc_update(&s, -10.0, 1.0, &p).unwrap();
        assert_eq!((s.q, s.soc, s.clamp_events), (0.0, 1.0, 1));
        let s = soc_update(&s, 500.0, 1.0, &p).unwrap();
        assert_eq!(s.soc, 0.0);
        assert_eq!(s.clamp_events, 2);
        assert!(soc_update(&s, 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn rest_keeps_capacity() {
        let p = cell();
        let s = BatteryState::from_soc(0.8, &p).unwrap();
        let s = soc_update(&s, 20.0, 0.5, &p).unwrap();
        let rest = soc_update(&s, 0.0, 0.5, &p).unwrap();
        assert_eq!(rest.soc, s.soc);
        assert_eq!(rest.capacity, s.capacity);
        assert_eq!(rest.last_active, Regime::Discharging);
    }

    #[test]
    fn voltage_laws_at_zero_current() {
        let p = cell();
        assert_relative_eq!(
            discharge_voltage(1.0, 0.0, 0.0, &p).unwrap(),
            2.085,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            charge_voltage(0.5, 0.0, 0.0, &p).unwrap(),
            2.08,
            max_relative = 1e-15
        );
    }

    #[test]
    fn voltage_laws_scale_with_n_serial() {
        let one = cell();
        let twelve = BatteryParams {
            n_serial: 12,
            ..cell()
        };
        let twenty_four = BatteryParams {
            n_serial: 24,
            ..cell()
        };
        for (soc, i) in [(0.3, 4.0), (0.7, 12.5), (0.95, 0.0)] {
            let d1 = discharge_voltage(soc, i, 3.0, &one).unwrap();
            assert_eq!(discharge_voltage(soc, i, 3.0, &twelve).unwrap(), 12.0 * d1);
            let c12 = charge_voltage(soc, i, 3.0, &twelve).unwrap();
            assert_eq!(
                charge_voltage(soc, i, 3.0, &twenty_four).unwrap(),
                2.0 * c12
            );
        }
    }

    #[test]
    fn voltage_orderings() {
        let p = cell();
        assert!(
            discharge_voltage(0.9, 5.0, 0.0, &p).unwrap()
                < discharge_voltage(1.0, 5.0, 0.0, &p).unwrap()
        );
        assert!(
            discharge_voltage(0.6, 10.0, 0.0, &p).unwrap()
                < discharge_voltage(0.6, 5.0, 0.0, &p).unwrap()
        );
        assert!(
            charge_voltage(0.5, 5.0, 0.0, &p).unwrap() > charge_voltage(0.5, 0.0, 0.0, &p).unwrap()
        );
        assert!(
            charge_voltage(0.6, 5.0, 0.0, &p).unwrap() > charge_voltage(0.5, 5.0, 0.0, &p).unwrap()
        );
    }

    #[test]
    fn singularity_guards() {
        let p = cell();
        assert!(matches!(
            discharge_voltage(0.005, 1.0, 0.0, &p),
            Err(Error::SingularityGuard { .. })
        ));
        assert!(matches!(
            discharge_voltage(0.0, 1.0, 0.0, &p),
            Err(Error::SingularityGuard { .. })
        ));
        assert!(matches!(
            charge_voltage(0.995, 1.0, 0.0, &p),
            Err(Error::SingularityGuard { .. })
        ));
        assert!(discharge_voltage(0.006, 1.0, 0.0, &p).is_ok());
        assert!(charge_voltage(0.994, 1.0, 0.0, &p).is_ok());
    }

    #[test]
    fn terminal_voltage_dispatch_and_hysteresis_gap() {
        let p = cell();
        let mut s = BatteryState::from_soc(0.99, &p).unwrap();
        assert_eq!(
            terminal_voltage(&s, 3.0, &p).unwrap(),
            discharge_voltage(0.99, 3.0, 0.0, &p).unwrap()
        );
        assert_eq!(
            terminal_voltage(&s, -3.0, &p).unwrap(),
            charge_voltage(0.99, 3.0, 0.0, &p).unwrap()
        );
        let v_dis = terminal_voltage(&s, 0.0, &p).unwrap();
        s.last_active = Regime::Charging;
        let v_ch = terminal_voltage(&s, 0.0, &p).unwrap();
        assert_relative_eq!(v_dis, 1.965 + 0.12 * 0.99, max_relative = 1e-15);
        assert_relative_eq!(v_ch, 2.0 + 0.16 * 0.99, max_relative = 1e-15);
        // Gap tends to 2.16 - 2.085 = 0.075 V as soc -> 1.
        assert_relative_eq!(v_ch - v_dis, 0.035 + 0.04 * 0.99, max_relative = 1e-12);
    }

    #[test]
    fn rest_voltage_matches_zero_current_branch() {
        let p = BatteryParams::default();
        let mut s = BatteryState::from_soc(0.42, &p).unwrap();
        assert_eq!(
            open_circuit_voltage(&s, &p),
            terminal_voltage(&s, 0.0, &p).unwrap()
        );
        s.last_active = Regime::Charging;
        assert_eq!(
            open_circuit_voltage(&s, &p),
            terminal_voltage(&s, 0.0, &p).unwrap()
        );
        s.soc = 0.0;
        assert_eq!(open_circuit_voltage(&s, &p), 24.0);
    }

    #[test]
    fn parallel_strings_share_current() {
        let one = BatteryParams::default();
        let two = BatteryParams {
            n_parallel: 2,
            ..BatteryParams::default()
        };
        let s1 = BatteryState::from_soc(0.6, &one).unwrap();
        let s2 = BatteryState::from_soc(0.6, &two).unwrap();
        assert_eq!(
            terminal_voltage(&s2, 20.0, &two).unwrap(),
            terminal_voltage(&s1, 10.0, &one).unwrap()
        );
        assert_eq!(two.bank_capacity(20.0), 2.0 * one.bank_capacity(10.0));
    }

    #[test]
    fn fixed_point_current() {
        let p = BatteryParams::default();
        let s = BatteryState::from_soc(0.5, &p).unwrap();
        for power in [-800.0, -50.0, 0.5, 200.0, 1500.0] {
            let i = current_for_power(&s, power, &p).unwrap();
            let v = terminal_voltage(&s, i, &p).unwrap();
            assert!((power - i * v).abs() <= 1e-6 * f64::abs(power).max(1.0));
            assert_eq!(i.signum(), f64::signum(power));
        }
        assert_eq!(current_for_power(&s, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn impossible_discharge_power_fails() {
        let p = BatteryParams {
            c_10: 2.0,
            ..BatteryParams::default()
        };
        let s = BatteryState::from_soc(0.3, &p).unwrap();
        assert!(current_for_power(&s, 1e6, &p).is_err());
    }

    #[test]
    fn thevenin_form() {
        let p = BatteryParams::default();
        assert_relative_eq!(
            thevenin_voltage(10.0, &p),
            12.0 * (2.0 - 0.005 * 10.0),
            max_relative = 1e-15
        );
    }
}
