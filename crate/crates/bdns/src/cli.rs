//! Command-line entry point.

use std::path::{Path, PathBuf};

use bdns_core::law::default_samples;
use bdns_core::solver::run_with;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_law, parse_list, RunConfig};
use crate::error::{CliError, Result};
use crate::identities::{run_suite, SuiteOptions};
use crate::{checkpoint, ledger_io, study};

#[derive(Debug, Parser)]
#[command(name = "bdns", version, about = "Degenerate-viscosity compressible Navier-Stokes: solver, entropy ledgers and identity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a viscosity law against the admissibility conditions.
    ValidateLaw {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the solver and write the entropy ledger.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Final state in the binary checkpoint format.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Ledger as CSV, or JSON lines with a `.jsonl` extension.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Additional JSON-lines copy of the ledger.
        #[arg(long)]
        ledger_jsonl: Option<PathBuf>,
    },
    /// Certify the entropy identities on manufactured fields.
    VerifyIdentities(VerifyArgs),
    /// Run a mollified initial-data sequence and compare the members.
    StabilityStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for the per-member ledgers.
        #[arg(long, default_value = "study_ledgers")]
        ledger_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// JSON law or shorthand such as `rho+rho^2`.
    #[arg(long, default_value = "rho")]
    law: String,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value = "1,2")]
    dims: String,
    #[arg(long, default_value = "32,64,128")]
    grids: String,
    /// Pair `h` with this constant `g` instead of the law's.
    #[arg(long)]
    tamper_g: Option<f64>,
    #[arg(long, default_value = "0.01,0.05")]
    deltas: String,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunSummary {
    steps: usize,
    t: f64,
    eps_vac: f64,
    non_admissible: bool,
    clamped: usize,
    vacuum_momentum_zeroed: usize,
    initial_momentum_zeroed: usize,
    max_cutoff_cells: usize,
    max_energy_increase: f64,
    error: Option<String>,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn validate_law(config: &Path, out: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let rep = cfg.law.validate(&cfg.params()?, &default_samples())?;
    emit(&rep, out)?;
    Ok(if rep.pass { 0 } else { 1 })
}

fn simulate(config: &Path, cp: Option<&Path>, ledger: Option<&Path>, jsonl: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.solver_config()?;
    let init = cfg.initial_state()?;
    let (out, error) = match run_with(&sc, &init, None) {
        Ok(o) => (o, None),
        Err(a) if a.partial.trajectory.checkpoints.is_empty() => return Err(a.error.into()),
        Err(a) => (a.partial, Some(a.error)),
    };
    let dim = sc.grid.ndim();
    if let Some(p) = ledger {
        ledger_io::write(p, &out.ledger, dim)?;
    }
    if let Some(p) = jsonl {
        ledger_io::write_jsonl(p, &out.ledger)?;
    }
    let tr = &out.trajectory;
    if let Some(p) = cp {
        checkpoint::write(p, &sc.grid, &tr.final_state)?;
    }
    let summary = RunSummary {
        steps: tr.steps,
        t: tr.final_state.t,
        eps_vac: tr.eps_vac,
        non_admissible: tr.non_admissible,
        clamped: tr.counters.clamped,
        vacuum_momentum_zeroed: tr.counters.vacuum_momentum_zeroed,
        initial_momentum_zeroed: tr.counters.initial_momentum_zeroed,
        max_cutoff_cells: tr.counters.max_cutoff_cells,
        max_energy_increase: tr.max_energy_increase(),
        error: error.as_ref().map(ToString::to_string),
    };
    emit(&summary, None)?;
    Ok(if error.is_some() { 1 } else { 0 })
}

fn verify_identities(a: &VerifyArgs) -> Result<i32> {
    let mut opts = SuiteOptions::new(parse_law(&a.law)?, a.gamma);
    opts.dims = parse_list(&a.dims)?;
    opts.grids = parse_list(&a.grids)?;
    opts.deltas = parse_list(&a.deltas)?;
    opts.tamper_g = a.tamper_g;
    opts.nu = a.nu;
    opts.seed = a.seed;
    let rep = run_suite(&opts)?;
    for f in rep.failures() {
        eprintln!("not certified: {f}");
    }
    emit(&rep, a.out.as_deref())?;
    Ok(if rep.verdict { 0 } else { 1 })
}

fn stability_study(config: &Path, out: Option<&Path>, ledger_dir: &Path) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.study_spec()?;
    let rep = study::run_and_write(&spec, &cfg.solver_config()?, ledger_dir)?;
    for v in &rep.metric_violations {
        eprintln!("metric axiom violated: {v}");
    }
    emit(&rep, out)?;
    Ok(if rep.verdict() { 0 } else { 1 })
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::ValidateLaw { config, out } => validate_law(&config, out.as_deref()),
        Command::Simulate { config, checkpoint, ledger, ledger_jsonl } => {
            simulate(&config, checkpoint.as_deref(), ledger.as_deref(), ledger_jsonl.as_deref())
        }
        Command::VerifyIdentities(a) => verify_identities(&a),
        Command::StabilityStudy { config, out, ledger_dir } => stability_study(&config, out.as_deref(), &ledger_dir),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code: 0 success, 1 failed verdict or run, 2 usage, config or IO.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
