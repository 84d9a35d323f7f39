//! TOML configuration schema.
//!
//! Every section is optional and every key falls back to its default.
//! Unknown keys are rejected, and errors name the offending key path.
//!
//! ```toml
//! [simulation]
//! dt_s = 1.0
//! mppt = "flc"
//!
//! [battery]
//! c_10 = 400.0
//!
//! [profiles]
//! irradiance = "weather/irradiance.csv"   # relative to the config file
//!
//! [profiles.synthetic]
//! g_peak = 800.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery_model::BatteryParams;
use crate::converter::ConverterState;
use crate::mppt::bench::DeskScenario;
use crate::mppt::{MpptConfig, MpptKind};
use crate::profiles::{Quantity, SyntheticDay, TimeSeriesProfile};
use crate::pv_model::PvPanelParams;
use crate::sim_engine::{Environment, SimConfig};
use crate::supervisor::SupervisorConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_s: f64,
    pub t_end_s: f64,
    pub mppt: MpptKind,
    pub initial_soc: f64,
    pub bus_nominal_v: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            dt_s: sim.dt_s,
            t_end_s: sim.t_end_s,
            mppt: sim.mppt_kind,
            initial_soc: sim.initial_soc,
            bus_nominal_v: sim.bus_nominal_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverterSection {
    pub d_max: f64,
    pub eta: f64,
}

impl Default for ConverterSection {
    fn default() -> Self {
        let c = ConverterState::default();
        Self {
            d_max: c.d_max,
            eta: c.eta,
        }
    }
}

/// Profile sources. A CSV path replaces the synthetic series of the same
/// quantity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesSection {
    pub irradiance: Option<PathBuf>,
    pub temperature: Option<PathBuf>,
    pub load: Option<PathBuf>,
    pub synthetic: SyntheticDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub simulation: SimulationSection,
    pub pv: PvPanelParams,
    pub battery: BatteryParams,
    pub converter: ConverterSection,
    pub mppt: MpptConfig,
    pub supervisor: SupervisorConfig,
    pub profiles: ProfilesSection,
    /// Desk scenario for the controller comparison.
    pub compare: DeskScenario,
    /// Directory relative profile paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            simulation: SimulationSection::default(),
            pv: sim.pv,
            battery: sim.battery,
            converter: ConverterSection::default(),
            mppt: sim.mppt,
            supervisor: sim.supervisor,
            profiles: ProfilesSection::default(),
            compare: DeskScenario::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ConfigFile {
    /// Parse and validate a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::Config {
                key,
                message: e.into_inner().message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        self.profiles.synthetic.validate("profiles.synthetic.")?;
        self.compare.validate("compare.")
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            dt_s: s.dt_s,
            t_end_s: s.t_end_s,
            mppt_kind: s.mppt,
            initial_soc: s.initial_soc,
            bus_nominal_v: s.bus_nominal_v,
            pv: self.pv.clone(),
            battery: self.battery.clone(),
            converter: ConverterState {
                d: 0.0,
                d_max: self.converter.d_max,
                eta: self.converter.eta,
            },
            mppt: self.mppt.clone(),
            supervisor: self.supervisor.clone(),
        }
    }

    /// Build the input series: CSV files where given, synthetic otherwise.
    pub fn environment(&self) -> Result<Environment> {
        let day = self.profiles.synthetic.generate()?;
        let pick = |path: &Option<PathBuf>, q: Quantity, fallback: TimeSeriesProfile| match path {
            Some(p) => TimeSeriesProfile::load_csv(self.base_dir.join(p), q),
            None => Ok(fallback),
        };
        Ok(Environment {
            irradiance: pick(
                &self.profiles.irradiance,
                Quantity::Irradiance,
                day.irradiance,
            )?,
            temperature: pick(
                &self.profiles.temperature,
                Quantity::Temperature,
                day.temperature,
            )?,
            load: pick(&self.profiles.load, Quantity::Load, day.load)?,
        })
    }
}
