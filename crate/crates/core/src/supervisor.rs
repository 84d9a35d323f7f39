//! Five-mode power management supervisor.
//!
//! Switch roles: K1 is the PV -> battery charging path, K2 the PV -> load
//! path and K3 the battery -> load path. Under that assignment every mode
//! row below is consistent with its description:
//!
//! | Mode | K1  | K2  | K3  | Meaning                                   |
//! |------|-----|-----|-----|-------------------------------------------|
//! | 1    | On  | On  | Off | PV feeds the load and charges the battery |
//! | 2    | Off | On  | On  | PV short of load, battery tops up         |
//! | 3    | Off | Off | On  | No PV, battery alone feeds the load       |
//! | 4    | Off | On  | Off | Battery disconnected, PV feeds the load   |
//! | 5    | Off | Off | Off | Battery depleted, no PV, load shed        |
//!
//! SOC protection uses two latched inhibits with hysteresis: charging is
//! inhibited from `soc >= soc_max` until `soc <= soc_max_release`, and
//! discharging from `soc <= soc_min` until `soc >= soc_min_release`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SupervisorMode {
    Mode1,
    Mode2,
    Mode3,
    Mode4,
    Mode5,
}

impl SupervisorMode {
    pub const ALL: [SupervisorMode; 5] = [
        SupervisorMode::Mode1,
        SupervisorMode::Mode2,
        SupervisorMode::Mode3,
        SupervisorMode::Mode4,
        SupervisorMode::Mode5,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl std::fmt::Display for SupervisorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mode{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }

    pub fn bit(self) -> u8 {
        u8::from(self.is_on())
    }
}

impl std::fmt::Display for Switch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.is_on() { "On" } else { "Off" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchStates {
    pub k1: Switch,
    pub k2: Switch,
    pub k3: Switch,
}

/// Mode table as published, used to cross-check [`switch_states`].
pub const MODE_TABLE: [(SupervisorMode, [Switch; 3]); 5] = {
    use Switch::{Off, On};
    [
        (SupervisorMode::Mode1, [On, On, Off]),
        (SupervisorMode::Mode2, [Off, On, On]),
        (SupervisorMode::Mode3, [Off, Off, On]),
        (SupervisorMode::Mode4, [Off, On, Off]),
        (SupervisorMode::Mode5, [Off, Off, Off]),
    ]
};

pub fn switch_states(mode: SupervisorMode) -> SwitchStates {
    use Switch::{Off, On};
    let (k1, k2, k3) = match mode {
        SupervisorMode::Mode1 => (On, On, Off),
        SupervisorMode::Mode2 => (Off, On, On),
        SupervisorMode::Mode3 => (Off, Off, On),
        SupervisorMode::Mode4 => (Off, On, Off),
        SupervisorMode::Mode5 => (Off, Off, Off),
    };
    SwitchStates { k1, k2, k3 }
}

/// Render the mode table, one `ModeN K1 K2 K3` line per mode.
pub fn format_mode_table() -> String {
    SupervisorMode::ALL
        .iter()
        .map(|&m| {
            let s = switch_states(m);
            format!("{m} {} {} {}\n", s.k1, s.k2, s.k3)
        })
        .collect()
}

/// Compare [`switch_states`] against [`MODE_TABLE`]; returns the modes that
/// disagree.
pub fn check_mode_table() -> Vec<SupervisorMode> {
    MODE_TABLE
        .iter()
        .filter(|(mode, row)| {
            let s = switch_states(*mode);
            [s.k1, s.k2, s.k3] != *row
        })
        .map(|(mode, _)| *mode)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorConfig {
    pub soc_min: f64,
    pub soc_min_release: f64,
    pub soc_max: f64,
    pub soc_max_release: f64,
    /// PV power below this is treated as no PV [W].
    pub p_epsilon: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            soc_min: 0.20,
            soc_min_release: 0.25,
            soc_max: 0.90,
            soc_max_release: 0.85,
            p_epsilon: 1.0,
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let chain = [
            ("soc_min", self.soc_min),
            ("soc_min_release", self.soc_min_release),
            ("soc_max_release", self.soc_max_release),
            ("soc_max", self.soc_max),
        ];
        if !(self.soc_min > 0.0) {
            return Err(Error::config(format!("{prefix}soc_min"), "must be > 0"));
        }
        if !(self.soc_max < 1.0) {
            return Err(Error::config(format!("{prefix}soc_max"), "must be < 1"));
        }
        for w in chain.windows(2) {
            let ((lo_key, lo), (hi_key, hi)) = (w[0], w[1]);
            if !(lo < hi) {
                return Err(Error::config(
                    format!("{prefix}{lo_key}"),
                    format!("{prefix}{lo_key} ({lo}) must be < {prefix}{hi_key} ({hi})"),
                ));
            }
        }
        if !(self.p_epsilon > 0.0) {
            return Err(Error::config(format!("{prefix}p_epsilon"), "must be > 0"));
        }
        Ok(())
    }
}

/// Threaded supervisor state: the last mode plus the two SOC latches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupervisorState {
    pub mode: SupervisorMode,
    pub charge_inhibit: bool,
    pub discharge_inhibit: bool,
}

impl SupervisorState {
    /// Initial state for a bank at `soc`, latches set as if the thresholds
    /// had just been evaluated.
    pub fn new(soc: f64, config: &SupervisorConfig) -> Self {
        Self {
            mode: SupervisorMode::Mode4,
            charge_inhibit: soc >= config.soc_max,
            discharge_inhibit: soc <= config.soc_min,
        }
    }
}

/// Choose the operating mode.
///
/// Priority: surplus and chargeable -> 1; surplus, not chargeable -> 4;
/// partial PV and dischargeable -> 2; no PV and dischargeable -> 3; else 5.
/// A PV/load match within `p_epsilon` with a chargeable battery also lands
/// in 4: the load is fully served and the sliver of surplus is curtailed.
pub fn select_mode(
    p_pv: f64,
    p_load: f64,
    soc: f64,
    prev: &SupervisorState,
    config: &SupervisorConfig,
) -> SupervisorState {
    let charge_inhibit = if soc >= config.soc_max {
        true
    } else if soc <= config.soc_max_release {
        false
    } else {
        prev.charge_inhibit
    };
    let discharge_inhibit = if soc <= config.soc_min {
        true
    } else if soc >= config.soc_min_release {
        false
    } else {
        prev.discharge_inhibit
    };

    let mode = if p_pv >= p_load + config.p_epsilon && !charge_inhibit {
        SupervisorMode::Mode1
    } else if p_pv >= p_load {
        SupervisorMode::Mode4
    } else if p_pv >= config.p_epsilon && !discharge_inhibit {
        SupervisorMode::Mode2
    } else if p_pv < config.p_epsilon && !discharge_inhibit {
        SupervisorMode::Mode3
    } else {
        SupervisorMode::Mode5
    };
    SupervisorState {
        mode,
        charge_inhibit,
        discharge_inhibit,
    }
}

/// Power routed through each branch for one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRouting {
    /// Battery power, positive = discharge [W].
    pub p_bat: f64,
    pub p_load_served: f64,
    /// PV power that reaches neither load nor battery [W].
    pub p_curtailed: f64,
}

/// Branch flows implied by `mode`. `p_pv` is the PV power available on the
/// bus side of the converter.
pub fn battery_power_setpoint(mode: SupervisorMode, p_pv: f64, p_load: f64) -> PowerRouting {
    match mode {
        SupervisorMode::Mode1 => PowerRouting {
            p_bat: -(p_pv - p_load),
            p_load_served: p_load,
            p_curtailed: 0.0,
        },
        SupervisorMode::Mode2 => PowerRouting {
            p_bat: p_load - p_pv,
            p_load_served: p_load,
            p_curtailed: 0.0,
        },
        // K2 is open: whatever trickle the array produces goes unused.
        SupervisorMode::Mode3 => PowerRouting {
            p_bat: p_load,
            p_load_served: p_load,
            p_curtailed: p_pv,
        },
        SupervisorMode::Mode4 => {
            let served = p_pv.min(p_load);
            PowerRouting {
                p_bat: 0.0,
                p_load_served: served,
                p_curtailed: p_pv - served,
            }
        }
        SupervisorMode::Mode5 => PowerRouting {
            p_bat: 0.0,
            p_load_served: 0.0,
            p_curtailed: p_pv,
        },
    }
}
