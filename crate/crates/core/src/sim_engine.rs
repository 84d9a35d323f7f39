//! Fixed-timestep orchestration of the whole system.
//!
//! Per step: sample the profiles, run the MPPT controller when due, solve the
//! PV operating point at the voltage the duty cycle imposes on the bus, pick
//! a supervisor mode, route power, convert battery power to current, update
//! the state of charge and emit a [`SimRecord`].
//!
//! The bus is pinned to the battery terminal voltage whenever a battery
//! switch is closed, and to `bus_nominal_v` otherwise. The MPPT controller
//! sees the measurement of the previous step (sampled-data loop), and the
//! PV voltage of a step uses the bus voltage left by the previous step.

use std::io::Write;

use crate::battery_model::{
    current_for_power, open_circuit_voltage, soc_update, terminal_voltage, BatteryParams,
    BatteryState,
};
use crate::converter::{boost_output, pv_voltage, ConverterState};
use crate::mppt::{Controller, MpptConfig, MpptKind, MpptState};
use crate::profiles::TimeSeriesProfile;
use crate::pv_model::{solve_operating_current, PvPanelParams, KELVIN_OFFSET};
use crate::supervisor::{
    battery_power_setpoint, select_mode, switch_states, SupervisorConfig, SupervisorMode,
    SupervisorState, SwitchStates,
};
use crate::{Error, Result};

/// Relative tolerance for per-step power balance and ledger closure.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Engine step [s].
    pub dt_s: f64,
    pub t_end_s: f64,
    pub mppt_kind: MpptKind,
    pub initial_soc: f64,
    /// Bus reference while the battery is disconnected [V].
    pub bus_nominal_v: f64,
    pub pv: PvPanelParams,
    pub battery: BatteryParams,
    /// Converter limits; the duty field is ignored (the controller owns it).
    pub converter: ConverterState,
    pub mppt: MpptConfig,
    pub supervisor: SupervisorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 1.0,
            t_end_s: 86_400.0,
            mppt_kind: MpptKind::Flc,
            initial_soc: 0.6,
            bus_nominal_v: 24.0,
            pv: PvPanelParams::default(),
            battery: BatteryParams::default(),
            converter: ConverterState::default(),
            mppt: MpptConfig {
                initial_duty: 0.3,
                ..MpptConfig::default()
            },
            supervisor: SupervisorConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(Error::config("simulation.dt_s", "must be > 0"));
        }
        if !(self.t_end_s >= self.dt_s && self.t_end_s.is_finite()) {
            return Err(Error::config(
                "simulation.t_end_s",
                "must be >= simulation.dt_s",
            ));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::config(
                "simulation.initial_soc",
                "must lie in [0, 1]",
            ));
        }
        if !(self.bus_nominal_v > 0.0 && self.bus_nominal_v.is_finite()) {
            return Err(Error::config("simulation.bus_nominal_v", "must be > 0"));
        }
        self.pv.validate("pv.")?;
        self.battery.validate("battery.")?;
        ConverterState {
            d: 0.0,
            ..self.converter
        }
        .validate("converter.")?;
        self.mppt.validate("mppt.")?;
        self.supervisor.validate("supervisor.")
    }

    /// Number of records a run produces: `floor(t_end / dt)`.
    pub fn step_count(&self) -> usize {
        (self.t_end_s / self.dt_s).floor() as usize
    }

    /// Controller runs every this many engine steps (at least every step).
    pub fn mppt_every(&self) -> usize {
        ((self.mppt.t_mppt_s / self.dt_s).round() as usize).max(1)
    }
}

/// Input time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// W/m².
    pub irradiance: TimeSeriesProfile,
    /// °C; taken as the cell temperature.
    pub temperature: TimeSeriesProfile,
    /// W.
    pub load: TimeSeriesProfile,
}

/// Bit set of protective actions taken during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampFlags(pub u8);

impl ClampFlags {
    /// Negative PV current (above V_oc) clamped to zero.
    pub const PV_REVERSE: u8 = 1;
    /// SOC or extracted charge clamped to its bounds.
    pub const SOC: u8 = 2;
    /// Battery could not take the requested power (singularity guard or
    /// no fixed point); mode downgraded to 4 or 5.
    pub const BATTERY_DOWNGRADE: u8 = 4;

    pub fn set(&mut self, bit: u8) {
        self.0 |= bit;
    }

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub g: f64,
    pub t_amb: f64,
    /// PV terminal power [W].
    pub p_pv: f64,
    pub p_load_requested: f64,
    pub p_load_served: f64,
    /// Battery terminal power, positive = discharge [W].
    pub p_bat: f64,
    pub soc: f64,
    pub v_bat: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub d: f64,
    pub mode: SupervisorMode,
    pub switches: SwitchStates,
    pub p_curtailed: f64,
    pub clamp_flags: ClampFlags,
    pub controller: MpptKind,
    /// Battery bank current, positive = discharge [A].
    pub i_bat: f64,
    /// Converter loss [W].
    pub p_loss: f64,
    /// SOC the supervisor decided on (state before this step's update).
    pub soc_before: f64,
    /// Bank capacity used for this step's SOC [Ah].
    pub capacity: f64,
}

impl SimRecord {
    /// `p_pv + p_bat - p_load_served - p_curtailed - p_loss`.
    pub fn balance_residual(&self) -> f64 {
        self.p_pv + self.p_bat - self.p_load_served - self.p_curtailed - self.p_loss
    }

    pub fn balance_scale(&self) -> f64 {
        self.p_pv
            .max(self.p_load_requested)
            .max(self.p_bat.abs())
            .max(1.0)
    }
}

/// Energy totals over a run [Wh].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub e_pv: f64,
    pub e_load_served: f64,
    pub e_load_unserved: f64,
    pub e_bat_in: f64,
    pub e_bat_out: f64,
    pub e_curtailed: f64,
    pub e_loss: f64,
}

impl EnergyLedger {
    pub fn add(&mut self, r: &SimRecord, dt_h: f64) {
        self.e_pv += r.p_pv * dt_h;
        self.e_load_served += r.p_load_served * dt_h;
        self.e_load_unserved += (r.p_load_requested - r.p_load_served) * dt_h;
        self.e_bat_out += r.p_bat.max(0.0) * dt_h;
        self.e_bat_in += (-r.p_bat).max(0.0) * dt_h;
        self.e_curtailed += r.p_curtailed * dt_h;
        self.e_loss += r.p_loss * dt_h;
    }

    /// Sources minus sinks [Wh].
    pub fn closure_residual(&self) -> f64 {
        (self.e_pv + self.e_bat_out)
            - (self.e_load_served + self.e_bat_in + self.e_curtailed + self.e_loss)
    }

    /// Residual relative to the source total.
    pub fn closure_relative(&self) -> f64 {
        let scale = (self.e_pv + self.e_bat_out).max(1e-12);
        self.closure_residual().abs() / scale
    }

    pub fn closes(&self) -> bool {
        self.closure_relative() <= BALANCE_TOLERANCE
    }
}

/// State threaded from one step to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub k: usize,
    pub battery: BatteryState,
    pub mppt: MpptState,
    pub supervisor: SupervisorState,
    pub v_bus: f64,
    /// Last PV measurement `(P, V)` for the controller.
    pub last_pv: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<SimRecord>,
    pub ledger: EnergyLedger,
}

pub struct Simulation {
    config: SimConfig,
    env: Environment,
    controller: Controller,
}

impl Simulation {
    pub fn new(config: SimConfig, env: Environment) -> Result<Self> {
        config.validate()?;
        let controller = Controller::new(config.mppt_kind, &config.mppt);
        Ok(Self {
            config,
            env,
            controller,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn initial_state(&self) -> Result<SimState> {
        let cfg = &self.config;
        let battery = BatteryState::from_soc(cfg.initial_soc, &cfg.battery)?;
        Ok(SimState {
            k: 0,
            battery,
            mppt: MpptState::new(cfg.mppt.initial_duty, cfg.converter.d_max, cfg.mppt.delta_d),
            supervisor: SupervisorState::new(cfg.initial_soc, &cfg.supervisor),
            v_bus: open_circuit_voltage(&battery, &cfg.battery),
            last_pv: None,
        })
    }

    /// Advance one step from `state`.
    pub fn step(&self, state: &SimState) -> Result<(SimState, SimRecord)> {
        let cfg = &self.config;
        let t = state.k as f64 * cfg.dt_s;
        let mut flags = ClampFlags::default();

        let g = self.env.irradiance.sample(t)?;
        let t_amb = self.env.temperature.sample(t)?;
        let p_load = self.env.load.sample(t)?;

        let mut mppt = state.mppt;
        if state.k.is_multiple_of(cfg.mppt_every()) {
            if let Some((p, v)) = state.last_pv {
                mppt = self.controller.step(p, v, &mppt);
            }
        }

        let v_pv = pv_voltage(state.v_bus, mppt.d);
        let i_raw = solve_operating_current(v_pv, g, t_amb + KELVIN_OFFSET, &cfg.pv)?;
        if i_raw < 0.0 {
            flags.set(ClampFlags::PV_REVERSE);
        }
        let i_pv = i_raw.max(0.0);
        let p_pv = v_pv * i_pv;
        let (v_out, i_out) = boost_output(v_pv, i_pv, &cfg.converter.with_duty(mppt.d))?;
        let p_available = v_out * i_out;
        let p_loss = p_pv - p_available;

        let battery = &state.battery;
        let mut supervisor = select_mode(
            p_available,
            p_load,
            battery.soc,
            &state.supervisor,
            &cfg.supervisor,
        );
        let mut routing = battery_power_setpoint(supervisor.mode, p_available, p_load);
        let i_bat = match current_for_power(battery, routing.p_bat, &cfg.battery) {
            Ok(i) => i,
            Err(_) => {
                flags.set(ClampFlags::BATTERY_DOWNGRADE);
                supervisor.mode = if routing.p_bat < 0.0 {
                    SupervisorMode::Mode4
                } else {
                    SupervisorMode::Mode5
                };
                routing = battery_power_setpoint(supervisor.mode, p_available, p_load);
                0.0
            }
        };
        let v_bat = if i_bat == 0.0 {
            open_circuit_voltage(battery, &cfg.battery)
        } else {
            terminal_voltage(battery, i_bat, &cfg.battery)?
        };

        let next_battery = soc_update(battery, i_bat, cfg.dt_s / 3600.0, &cfg.battery)?;
        if next_battery.clamp_events > battery.clamp_events {
            flags.set(ClampFlags::SOC);
        }

        let switches = switch_states(supervisor.mode);
        let v_bus = if switches.k1.is_on() || switches.k3.is_on() {
            v_bat
        } else {
            cfg.bus_nominal_v
        };

        let record = SimRecord {
            t,
            g,
            t_amb,
            p_pv,
            p_load_requested: p_load,
            p_load_served: routing.p_load_served,
            p_bat: routing.p_bat,
            soc: next_battery.soc,
            v_bat,
            v_pv,
            i_pv,
            d: mppt.d,
            mode: supervisor.mode,
            switches,
            p_curtailed: routing.p_curtailed,
            clamp_flags: flags,
            controller: self.controller.kind(),
            i_bat,
            p_loss,
            soc_before: battery.soc,
            capacity: next_battery.capacity,
        };
        let next = SimState {
            k: state.k + 1,
            battery: next_battery,
            mppt,
            supervisor,
            v_bus,
            last_pv: Some((p_pv, v_pv)),
        };
        Ok((next, record))
    }

    pub fn run(&self) -> Result<SimOutput> {
        let n = self.config.step_count();
        let dt_h = self.config.dt_s / 3600.0;
        let mut state = self.initial_state()?;
        let mut records = Vec::with_capacity(n);
        let mut ledger = EnergyLedger::default();
        for _ in 0..n {
            let k = state.k;
            let (next, record) = self.step(&state).map_err(|e| Error::Step {
                step: k,
                source: Box::new(e),
            })?;
            ledger.add(&record, dt_h);
            records.push(record);
            state = next;
        }
        Ok(SimOutput { records, ledger })
    }
}

pub fn run(config: SimConfig, env: Environment) -> Result<SimOutput> {
    Simulation::new(config, env)?.run()
}

pub const RECORD_HEADER: &str = "t,g,t_amb,p_pv,p_load_requested,p_load_served,p_bat,soc,v_bat,v_pv,i_pv,d,mode,k1,k2,k3,p_curtailed,clamp_flags,controller";

pub fn write_records_csv<W: Write>(records: &[SimRecord], out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.g,
            r.t_amb,
            r.p_pv,
            r.p_load_requested,
            r.p_load_served,
            r.p_bat,
            r.soc,
            r.v_bat,
            r.v_pv,
            r.i_pv,
            r.d,
            r.mode.number(),
            r.switches.k1.bit(),
            r.switches.k2.bit(),
            r.switches.k3.bit(),
            r.p_curtailed,
            r.clamp_flags.0,
            r.controller.name(),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ledger<W: Write>(ledger: &EnergyLedger, mut out: W) -> Result<()> {
    writeln!(out, "[ledger]")?;
    writeln!(out, "e_pv_wh = {}", ledger.e_pv)?;
    writeln!(out, "e_load_served_wh = {}", ledger.e_load_served)?;
    writeln!(out, "e_load_unserved_wh = {}", ledger.e_load_unserved)?;
    writeln!(out, "e_bat_in_wh = {}", ledger.e_bat_in)?;
    writeln!(out, "e_bat_out_wh = {}", ledger.e_bat_out)?;
    writeln!(out, "e_curtailed_wh = {}", ledger.e_curtailed)?;
    writeln!(out, "e_loss_wh = {}", ledger.e_loss)?;
    writeln!(out, "closure_residual_wh = {}", ledger.closure_residual())?;
    writeln!(out, "closure_relative = {}", ledger.closure_relative())?;
    Ok(())
}
