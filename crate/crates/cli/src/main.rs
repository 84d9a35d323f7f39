//! `pvsim`: batch front-end for the stand-alone PV/battery simulator.
//!
//! Exit codes: 0 success, 1 bad flag or config, 2 I/O failure, 3 a checked
//! invariant did not hold.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pvsim_core::config::ConfigFile;
use pvsim_core::mppt::bench::{run_desk, summarize, DeskSample, SegmentSummary};
use pvsim_core::mppt::{Controller, MpptKind};
use pvsim_core::pv_model::{iv_sweep, mpp_oracle, KELVIN_OFFSET};
use pvsim_core::sim_engine::{write_ledger, write_records_csv, Simulation, BALANCE_TOLERANCE};
use pvsim_core::supervisor::{check_mode_table, format_mode_table};

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pvsim",
    version,
    about = "Stand-alone PV + lead-acid battery system simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full simulation and write the per-step CSV and energy ledger.
    Simulate {
        /// TOML config; built-in defaults when absent.
        #[arg(long, env = "PVSIM_CONFIG")]
        config: Option<PathBuf>,
        /// Per-step CSV output.
        #[arg(long)]
        out: PathBuf,
        /// Ledger output; defaults to the CSV path with extension `ledger.toml`.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Override the configured MPPT controller.
        #[arg(long, value_parser = parse_kind)]
        mppt: Option<MpptKind>,
        /// Accepted for scripting symmetry; the simulator has no randomness.
        #[arg(long)]
        seedless: bool,
    },
    /// Sweep the configured PV array from 0 to V_oc.
    IvCurve {
        /// Irradiance [W/m²].
        #[arg(long)]
        g: f64,
        /// Cell temperature [°C].
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "PVSIM_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Run both MPPT controllers through the `[compare]` desk scenario.
    MpptCompare {
        #[arg(long, env = "PVSIM_CONFIG")]
        config: Option<PathBuf>,
        /// Per-step CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the mode/switch table and check it against the supervisor.
    ModesCheck,
}

fn parse_kind(s: &str) -> std::result::Result<MpptKind, String> {
    s.parse::<MpptKind>().map_err(|e| e.to_string())
}

/// A checked property failed; maps to exit code 3.
#[derive(Debug)]
struct InvariantFailure(String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pvsim: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InvariantFailure>() {
            return EXIT_INVARIANT;
        }
        if cause.is::<io::Error>() {
            return EXIT_IO;
        }
        if let Some(core) = cause.downcast_ref::<pvsim_core::Error>() {
            return core_exit_code(core);
        }
    }
    EXIT_CONFIG
}

fn core_exit_code(e: &pvsim_core::Error) -> u8 {
    use pvsim_core::Error as E;
    match e {
        E::Io(_) => EXIT_IO,
        E::Config { .. } | E::MissingColumn(_) | E::NonMonotonic { .. } | E::BadRow { .. } => {
            EXIT_CONFIG
        }
        E::OutOfRange { .. } => EXIT_CONFIG,
        E::Step { source, .. } => core_exit_code(source),
        E::Domain(_) | E::NoConvergence { .. } | E::SingularityGuard { .. } => EXIT_INVARIANT,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            ledger,
            mppt,
            seedless: _,
        } => simulate(config.as_deref(), &out, ledger, mppt),
        Command::IvCurve {
            g,
            t,
            points,
            out,
            config,
        } => iv_curve(g, t, points, out.as_deref(), config.as_deref()),
        Command::MpptCompare { config, out } => mppt_compare(config.as_deref(), &out),
        Command::ModesCheck => modes_check(),
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ConfigFile::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn simulate(
    config: Option<&Path>,
    out: &Path,
    ledger: Option<PathBuf>,
    mppt: Option<MpptKind>,
) -> Result<()> {
    let file = load_config(config)?;
    let mut sim_config = file.sim_config();
    if let Some(kind) = mppt {
        sim_config.mppt_kind = kind;
    }
    let env = file.environment()?;
    let output = Simulation::new(sim_config, env)?.run()?;

    write_records_csv(&output.records, create(out)?)
        .with_context(|| format!("writing {}", out.display()))?;
    let ledger_path = ledger.unwrap_or_else(|| out.with_extension("ledger.toml"));
    let mut ledger_out = create(&ledger_path)?;
    write_ledger(&output.ledger, &mut ledger_out)
        .and_then(|()| ledger_out.flush().map_err(Into::into))
        .with_context(|| format!("writing {}", ledger_path.display()))?;

    let worst_row = output
        .records
        .iter()
        .map(|r| r.balance_residual().abs() / r.balance_scale())
        .fold(0.0, f64::max);
    let l = &output.ledger;
    eprintln!(
        "{} steps, pv {:.1} Wh, load served {:.1} Wh, unserved {:.1} Wh, ledger residual {:.3e}",
        output.records.len(),
        l.e_pv,
        l.e_load_served,
        l.e_load_unserved,
        l.closure_relative()
    );
    if worst_row > BALANCE_TOLERANCE {
        return Err(
            InvariantFailure(format!("per-step power balance off by {worst_row:e}")).into(),
        );
    }
    if !l.closes() {
        return Err(InvariantFailure(format!(
            "energy ledger does not close: {:e}",
            l.closure_relative()
        ))
        .into());
    }
    Ok(())
}

fn iv_curve(
    g: f64,
    t_c: f64,
    points: usize,
    out: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    anyhow::ensure!(points >= 2, "--points must be at least 2");
    anyhow::ensure!(
        g >= 0.0 && g.is_finite(),
        "--g must be a non-negative irradiance"
    );
    anyhow::ensure!(
        t_c.is_finite() && t_c > -KELVIN_OFFSET,
        "--t must be above absolute zero"
    );
    let pv = load_config(config)?.pv;
    let t_j = t_c + KELVIN_OFFSET;
    let sweep = iv_sweep(g, t_j, points, &pv)?;
    let mpp = mpp_oracle(g, t_j, &pv, 0.01)?;

    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    writeln!(w, "v,i,p")?;
    for pt in &sweep {
        writeln!(w, "{},{},{}", pt.v_pv, pt.i_pv, pt.p_pv)?;
    }
    writeln!(w, "#mpp,{},{}", mpp.v_mpp, mpp.p_mpp)?;
    w.flush()?;
    Ok(())
}

fn mppt_compare(config: Option<&Path>, out: &Path) -> Result<()> {
    let file = load_config(config)?;
    let scenario = &file.compare;
    let converter = file.sim_config().converter;
    let run_one = |kind| -> pvsim_core::Result<(Vec<DeskSample>, Vec<SegmentSummary>)> {
        let samples = run_desk(
            &Controller::new(kind, &file.mppt),
            &file.mppt,
            &file.pv,
            &converter,
            scenario,
        )?;
        let summary = summarize(&samples, &file.pv, scenario)?;
        Ok((samples, summary))
    };
    let (po, flc) = std::thread::scope(|s| {
        let po = s.spawn(|| run_one(MpptKind::Po));
        let flc = s.spawn(|| run_one(MpptKind::Flc));
        (
            po.join().expect("P&O worker panicked"),
            flc.join().expect("FLC worker panicked"),
        )
    });
    let (po_samples, po_summary) = po?;
    let (flc_samples, flc_summary) = flc?;

    let mut w = create(out)?;
    writeln!(w, "step,segment,g,d_po,v_po,p_po,d_flc,v_flc,p_flc")?;
    for (a, b) in po_samples.iter().zip(&flc_samples) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            a.step, a.segment, a.g, a.d, a.v_pv, a.p_pv, b.d, b.v_pv, b.p_pv
        )?;
    }
    w.flush()?;

    let fmt_eff = |s: &SegmentSummary| {
        s.efficiency
            .map_or("n/a".to_string(), |e| format!("{e:.6}"))
    };
    println!("segment,g,t_c,p_mpp,po_efficiency,po_ripple,flc_efficiency,flc_ripple");
    let mut ripple_ok = true;
    for ((seg, a), b) in scenario.segments.iter().zip(&po_summary).zip(&flc_summary) {
        println!(
            "{},{},{},{:.6},{},{:.6},{},{:.6}",
            a.segment,
            seg.g,
            seg.t_c,
            a.p_mpp,
            fmt_eff(a),
            a.ripple,
            fmt_eff(b),
            b.ripple
        );
        if a.efficiency.is_some() && b.ripple >= a.ripple {
            ripple_ok = false;
        }
    }
    if !ripple_ok {
        return Err(InvariantFailure(
            "fuzzy ripple is not below P&O ripple in every lit segment".into(),
        )
        .into());
    }
    Ok(())
}

fn modes_check() -> Result<()> {
    print!("{}", format_mode_table());
    let mismatched = check_mode_table();
    if !mismatched.is_empty() {
        let names: Vec<String> = mismatched.iter().map(ToString::to_string).collect();
        return Err(
            InvariantFailure(format!("switch table mismatch in {}", names.join(", "))).into(),
        );
    }
    Ok(())
}
