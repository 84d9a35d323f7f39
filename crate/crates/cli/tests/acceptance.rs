//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use pvsim_core::battery_model::{capacity, charge_voltage, discharge_voltage, BatteryParams};
use pvsim_core::config::ConfigFile;
use pvsim_core::converter::ConverterState;
use pvsim_core::mppt::bench::{run_desk, summarize, DeskScenario};
use pvsim_core::mppt::{Controller, FuzzyLabel, MpptConfig, MpptKind, RULE_TABLE};
use pvsim_core::profiles::{Quantity, TimeSeriesProfile};
use pvsim_core::pv_model::{diode_residual, iv_sweep, PvPanelParams, KELVIN_OFFSET};
use pvsim_core::sim_engine::{Environment, SimConfig, SimRecord, Simulation, BALANCE_TOLERANCE};
use pvsim_core::supervisor::{select_mode, SupervisorConfig, SupervisorState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

const BIN: &str = env!("CARGO_BIN_EXE_pvsim");

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "1 mode/switch table exact",
            Duration::from_secs(1),
            mode_table,
        ),
        (
            "2 rule base exact and symmetric",
            Duration::from_secs(1),
            rule_base,
        ),
        (
            "3 MPPT tracking and ripple",
            Duration::from_secs(5),
            mppt_tracking,
        ),
        (
            "4 diode equation fidelity",
            Duration::from_secs(1),
            diode_fidelity,
        ),
        (
            "5 battery formula oracle",
            Duration::from_secs(1),
            battery_oracle,
        ),
        (
            "6 energy ledger closure",
            Duration::from_secs(10),
            ledger_closure,
        ),
        (
            "7 supervisor safety",
            Duration::from_secs(5),
            supervisor_safety,
        ),
        ("8 determinism", Duration::from_secs(20), determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => {
                Err(format!("{detail}; took {took:.2?}, budget {budget:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail} ({took:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail} ({took:.2?})");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mode_table() -> Outcome {
    const EXPECTED: &str = "Mode1 On On Off\n\
                            Mode2 Off On On\n\
                            Mode3 Off Off On\n\
                            Mode4 Off On Off\n\
                            Mode5 Off Off Off\n";
    let out = Command::new(BIN)
        .arg("modes-check")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), || {
        format!("exit {:?}", out.status.code())
    })?;
    ensure(out.stdout == EXPECTED.as_bytes(), || {
        format!("output differs:\n{}", String::from_utf8_lossy(&out.stdout))
    })?;
    Ok("5 rows byte-identical, exit 0".into())
}

fn rule_base() -> Outcome {
    // Rows indexed by E, columns by CE, in NB NS Z PS PB order.
    const TRANSCRIBED: [[&str; 5]; 5] = [
        ["NB", "NB", "NS", "NS", "Z"],
        ["NB", "NS", "NS", "Z", "PS"],
        ["NS", "NS", "Z", "PS", "PS"],
        ["NS", "Z", "PS", "PS", "PB"],
        ["Z", "PS", "PS", "PB", "PB"],
    ];
    for i in 0..5 {
        for j in 0..5 {
            let m = RULE_TABLE[i][j];
            ensure(m.as_str() == TRANSCRIBED[i][j], || {
                format!("cell ({i},{j}) is {} not {}", m.as_str(), TRANSCRIBED[i][j])
            })?;
            ensure(m == RULE_TABLE[j][i], || {
                format!("M({i},{j}) != M({j},{i})")
            })?;
            ensure(RULE_TABLE[4 - i][4 - j] == m.negate(), || {
                format!("M(-{i},-{j}) != -M({i},{j})")
            })?;
        }
    }
    ensure(
        FuzzyLabel::ALL
            .iter()
            .map(|l| l.as_str())
            .eq(["NB", "NS", "Z", "PS", "PB"]),
        || "label order".into(),
    )?;
    Ok("25 cells match, symmetric and odd".into())
}

fn mppt_tracking() -> Outcome {
    let pv = PvPanelParams::generic_80w();
    let mppt = MpptConfig::default();
    let converter = ConverterState::default();
    let scenario = DeskScenario::constant(1000.0, 25.0, 500);
    let mut results = Vec::new();
    for kind in [MpptKind::Po, MpptKind::Flc] {
        let samples = run_desk(
            &Controller::new(kind, &mppt),
            &mppt,
            &pv,
            &converter,
            &scenario,
        )
        .map_err(|e| e.to_string())?;
        let s = summarize(&samples, &pv, &scenario).map_err(|e| e.to_string())?[0];
        let eff = s.efficiency.ok_or("oracle power is zero")?;
        ensure(eff >= 0.98, || {
            format!("{} efficiency {eff:.5} < 0.98", kind.name())
        })?;
        results.push((eff, s.ripple));
    }
    let (po, flc) = (results[0], results[1]);
    ensure(flc.1 < po.1, || {
        format!(
            "flc ripple {:.4} W not below po ripple {:.4} W",
            flc.1, po.1
        )
    })?;
    Ok(format!(
        "po eff {:.5} ripple {:.4} W, flc eff {:.5} ripple {:.4} W",
        po.0, po.1, flc.0, flc.1
    ))
}

fn diode_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    for pv in [PvPanelParams::generic_80w(), PvPanelParams::default()] {
        for (g, t_c) in [(1000.0, 25.0), (600.0, 45.0), (150.0, 0.0)] {
            let t_j = t_c + KELVIN_OFFSET;
            let sweep = iv_sweep(g, t_j, 1000, &pv).map_err(|e| e.to_string())?;
            for pt in &sweep {
                let r = diode_residual(pt.v_pv, pt.i_pv, g, t_j, &pv)
                    .map_err(|e| e.to_string())?
                    .abs();
                worst = worst.max(r);
                ensure(r <= 1e-9, || {
                    format!("residual {r:e} A at V={} (G={g})", pt.v_pv)
                })?;
            }
            for w in sweep.windows(2) {
                ensure(w[1].i_pv < w[0].i_pv, || {
                    format!("I not strictly decreasing at V={}", w[1].v_pv)
                })?;
            }
            let rises: Vec<bool> = sweep.windows(2).map(|w| w[1].p_pv > w[0].p_pv).collect();
            let peak = rises.iter().position(|&r| !r).unwrap_or(rises.len());
            ensure(
                rises[..peak].iter().all(|&r| r) && rises[peak..].iter().all(|&r| !r),
                || format!("P(V) not unimodal at G={g}"),
            )?;
        }
    }
    Ok(format!(
        "6 sweeps x 1000 points, worst residual {worst:.1e} A"
    ))
}

/// Straight-line transcription of the capacity and voltage laws.
fn oracle_capacity(c10: f64, i: f64, dt: f64) -> f64 {
    let i10 = c10 / 10.0;
    1.76 * c10 * (1.0 + 0.005 * dt) / (1.0 + 0.67 * (i / i10))
}

fn oracle_discharge(n: f64, c10: f64, soc: f64, i: f64, dt: f64) -> f64 {
    let ocv = 1.965 + 0.12 * soc;
    let over =
        i / c10 * (4.0 / (1.0 + i.powf(1.3)) + 0.27 / soc.powf(1.5) + 0.02) * (1.0 - 0.007 * dt);
    n * (ocv - over)
}

fn oracle_charge(n: f64, c10: f64, soc: f64, i: f64, dt: f64) -> f64 {
    let ocv = 2.0 + 0.16 * soc;
    let over = i / c10
        * (6.0 / (1.0 + i.powf(0.86)) + 0.48 / (1.0 - soc).powf(1.2) + 0.036)
        * (1.0 - 0.025 * dt);
    n * (ocv + over)
}

fn battery_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let params = BatteryParams {
            c_10: rng.gen_range(10.0..2000.0),
            n_serial: rng.gen_range(1..=48),
            ..BatteryParams::default()
        };
        let n = f64::from(params.n_serial);
        let soc = rng.gen_range(0.0051..0.9949);
        let i = rng.gen_range(0.0..3.0 * params.c_10 / 10.0);
        let dt = rng.gen_range(-20.0..40.0);
        let pairs = [
            (
                capacity(i, dt, &params),
                oracle_capacity(params.c_10, i, dt),
            ),
            (
                discharge_voltage(soc, i, dt, &params).map_err(|e| e.to_string())?,
                oracle_discharge(n, params.c_10, soc, i, dt),
            ),
            (
                charge_voltage(soc, i, dt, &params).map_err(|e| e.to_string())?,
                oracle_charge(n, params.c_10, soc, i, dt),
            ),
        ];
        for (got, want) in pairs {
            let e = rel(got, want);
            worst = worst.max(e);
            ensure(e <= 1e-12, || {
                format!("soc={soc} i={i} dT={dt}: {got} vs {want} (rel {e:e})")
            })?;
        }
    }
    Ok(format!(
        "1000 random inputs x 3 laws, worst relative error {worst:.1e}"
    ))
}

fn ledger_closure() -> Outcome {
    let file = ConfigFile::default();
    let cfg = SimConfig {
        dt_s: 1.0,
        t_end_s: 86_400.0,
        ..file.sim_config()
    };
    let out = Simulation::new(cfg, file.environment().map_err(|e| e.to_string())?)
        .and_then(|s| s.run())
        .map_err(|e| e.to_string())?;
    ensure(out.records.len() == 86_400, || {
        format!("{} steps", out.records.len())
    })?;
    let rel = out.ledger.closure_relative();
    ensure(rel <= BALANCE_TOLERANCE, || {
        format!("relative residual {rel:e}")
    })?;
    Ok(format!(
        "86400 steps, e_pv {:.1} Wh, relative residual {rel:.1e}",
        out.ledger.e_pv
    ))
}

fn random_environment(rng: &mut ChaCha8Rng, t_end: f64, load_max: f64) -> Environment {
    let n = (t_end / 60.0).ceil() as usize + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * 60.0).collect();
    let (mut g, mut l): (f64, f64) = (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..load_max));
    let (mut irr, mut temp, mut load) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        g = (g + rng.gen_range(-150.0..150.0)).clamp(0.0, 1100.0);
        irr.push(if rng.gen_bool(0.1) {
            g * rng.gen_range(0.0..1.0)
        } else {
            g
        });
        temp.push(rng.gen_range(5.0..45.0));
        if rng.gen_bool(0.2) {
            l = rng.gen_range(0.0..load_max);
        }
        load.push(l);
    }
    Environment {
        irradiance: TimeSeriesProfile::new(Quantity::Irradiance, times.clone(), irr).unwrap(),
        temperature: TimeSeriesProfile::new(Quantity::Temperature, times.clone(), temp).unwrap(),
        load: TimeSeriesProfile::new(Quantity::Load, times, load).unwrap(),
    }
}

/// Tracks the hysteresis latches and the band crossings of an SOC path.
struct HysteresisAudit<'a> {
    cfg: &'a SupervisorConfig,
    discharge: bool,
    charge: bool,
    transitions: usize,
    /// Last band edge reached on each side: `Some(true)` = trip side.
    low_side: Option<bool>,
    high_side: Option<bool>,
    crossings: usize,
}

impl<'a> HysteresisAudit<'a> {
    fn new(cfg: &'a SupervisorConfig, init: &SupervisorState) -> Self {
        Self {
            cfg,
            discharge: init.discharge_inhibit,
            charge: init.charge_inhibit,
            transitions: 0,
            low_side: None,
            high_side: None,
            crossings: 0,
        }
    }

    fn observe(&mut self, soc: f64, next: &SupervisorState) -> Result<(), String> {
        let c = self.cfg;
        let side = |trip: bool, release: bool| {
            if trip {
                Some(true)
            } else if release {
                Some(false)
            } else {
                None
            }
        };
        for (slot, now) in [
            (
                &mut self.low_side,
                side(soc <= c.soc_min, soc >= c.soc_min_release),
            ),
            (
                &mut self.high_side,
                side(soc >= c.soc_max, soc <= c.soc_max_release),
            ),
        ] {
            if let Some(s) = now {
                if slot.is_some_and(|prev| prev != s) {
                    self.crossings += 1;
                }
                *slot = Some(s);
            }
        }
        if next.discharge_inhibit != self.discharge {
            let ok = if next.discharge_inhibit {
                soc <= c.soc_min
            } else {
                soc >= c.soc_min_release
            };
            ensure(ok, || {
                format!("discharge latch flipped inside the band at soc {soc}")
            })?;
            self.discharge = next.discharge_inhibit;
            self.transitions += 1;
        }
        if next.charge_inhibit != self.charge {
            let ok = if next.charge_inhibit {
                soc >= c.soc_max
            } else {
                soc <= c.soc_max_release
            };
            ensure(ok, || {
                format!("charge latch flipped inside the band at soc {soc}")
            })?;
            self.charge = next.charge_inhibit;
            self.transitions += 1;
        }
        Ok(())
    }

    /// At most one latch transition per band crossing, plus the first
    /// engagement on each side.
    fn verdict(&self) -> Result<(), String> {
        ensure(self.transitions <= self.crossings + 2, || {
            format!(
                "{} transitions for {} crossings",
                self.transitions, self.crossings
            )
        })
    }
}

fn supervisor_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut steps = 0;
    let (mut sim_transitions, mut sim_crossings) = (0, 0);

    // Full simulations on random weather and load, small bank so the SOC
    // reaches both protection bands.
    for run in 0..4 {
        let mut cfg = SimConfig {
            dt_s: 5.0,
            t_end_s: 60_000.0,
            initial_soc: 0.5,
            ..SimConfig::default()
        };
        cfg.battery.c_10 = 120.0;
        cfg.mppt_kind = if run % 2 == 0 {
            MpptKind::Flc
        } else {
            MpptKind::Po
        };
        let load_max = if run < 2 { 900.0 } else { 250.0 };
        let env = random_environment(&mut rng, cfg.t_end_s, load_max);
        let sup = cfg.supervisor.clone();
        let sim = Simulation::new(cfg, env).map_err(|e| e.to_string())?;
        let mut state = sim.initial_state().map_err(|e| e.to_string())?;
        let mut audit = HysteresisAudit::new(&sup, &state.supervisor);
        for _ in 0..sim.config().step_count() {
            let (next, r): (_, SimRecord) = sim.step(&state).map_err(|e| e.to_string())?;
            ensure(
                !(r.soc_before <= sup.soc_min && r.switches.k3.is_on()),
                || format!("K3 On at soc {} (t={})", r.soc_before, r.t),
            )?;
            ensure(
                !(r.soc_before >= sup.soc_max && r.switches.k1.is_on()),
                || format!("K1 On at soc {} (t={})", r.soc_before, r.t),
            )?;
            audit.observe(r.soc_before, &next.supervisor)?;
            state = next;
            steps += 1;
        }
        audit.verdict()?;
        sim_transitions += audit.transitions;
        sim_crossings += audit.crossings;
    }
    ensure(sim_transitions > 0, || "protection never engaged".into())?;

    // Supervisor alone on a noisy SOC random walk that dwells at the
    // thresholds.
    let cfg = SupervisorConfig::default();
    let mut soc: f64 = 0.5;
    let mut state = SupervisorState::new(soc, &cfg);
    let mut audit = HysteresisAudit::new(&cfg, &state);
    for _ in 0..100_000 {
        soc = (soc + rng.gen_range(-0.004..0.004)).clamp(0.0, 1.0);
        let measured = (soc + rng.gen_range(-0.002..0.002)).clamp(0.0, 1.0);
        let p_pv = rng.gen_range(0.0..800.0);
        let p_load = rng.gen_range(0.0..800.0);
        let next = select_mode(p_pv, p_load, measured, &state, &cfg);
        let sw = pvsim_core::supervisor::switch_states(next.mode);
        ensure(!(measured <= cfg.soc_min && sw.k3.is_on()), || {
            format!("K3 On at soc {measured}")
        })?;
        ensure(!(measured >= cfg.soc_max && sw.k1.is_on()), || {
            format!("K1 On at soc {measured}")
        })?;
        audit.observe(measured, &next)?;
        state = next;
    }
    audit.verdict()?;
    ensure(audit.crossings > 10, || {
        format!(
            "random walk crossed the bands only {} times",
            audit.crossings
        )
    })?;
    Ok(format!(
        "{steps} simulated steps ({sim_transitions} latch transitions / {sim_crossings} crossings), \
         100000 supervisor steps ({} / {})",
        audit.transitions, audit.crossings
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(BIN)
            .args(["simulate", "--seedless", "--out"])
            .arg(&out)
            .env_remove("PVSIM_CONFIG")
            .stderr(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || {
            format!("simulate exited {:?}", status.code())
        })?;
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let a = run("a.csv")?;
    let b = run("b.csv")?;
    ensure(a == b, || "CSV outputs differ".into())?;
    Ok(format!("two 24 h runs, {} bytes each, identical", a.len()))
}
