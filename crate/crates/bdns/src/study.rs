//! Parallel stability study with per-member ledger files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bdns_core::solver::run_with;
use bdns_core::study::{generate_sequence, GeneratedSequence, HypothesisValues, MemberOutcome, MemberSummary};
use bdns_core::{InitialDataSpec, SolverConfig, StabilityStudy};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::ledger_io;

/// Reads `BDNS_THREADS`; unset or 0 means one thread per core.
pub fn thread_count() -> Result<usize> {
    match std::env::var("BDNS_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("BDNS_THREADS must be a count, got `{v}`"))),
    }
}

pub fn run_parallel(spec: &InitialDataSpec, config: &SolverConfig, threads: usize) -> Result<(GeneratedSequence, StabilityStudy, Vec<MemberOutcome>)> {
    let seq = generate_sequence(spec, &config.grid, &config.law, config.gamma(), config.moment.delta)?;
    let mut cfg = config.clone();
    cfg.eps_vac.get_or_insert(seq.eps_vac);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let outcomes: Vec<MemberOutcome> = pool.install(|| {
        seq.states
            .par_iter()
            .enumerate()
            .map(|(n, s)| MemberOutcome { index: n, sigma: spec.sigma(n as u32), result: run_with(&cfg, s, None) })
            .collect()
    });
    let study = StabilityStudy::assemble(&config.grid, &outcomes)?;
    Ok((seq, study, outcomes))
}

/// The study report written by `stability-study`.
#[derive(Debug, Serialize)]
pub struct StudyReport {
    /// Ledger file of every member, completed or not.
    pub members: Vec<PathBuf>,
    pub member_status: Vec<MemberSummary>,
    pub completed: Vec<usize>,
    pub times: Vec<f64>,
    pub d_rho: Vec<Vec<f64>>,
    pub d_u: Vec<Vec<f64>>,
    pub d_m: Vec<Vec<f64>>,
    pub vacuum: Vec<f64>,
    pub vacuum_ratio: Vec<f64>,
    /// Largest per-member supremum of each ledger bound.
    pub uniform_bounds: BTreeMap<String, f64>,
    /// Spread `max/min` of the per-member suprema.
    pub uniform_ratios: BTreeMap<String, f64>,
    pub hypotheses: Vec<HypothesisValues>,
    pub flagged: Vec<String>,
    pub eps_vac: f64,
    pub delta: f64,
    pub metric_violations: Vec<String>,
    pub partial: bool,
}

impl StudyReport {
    pub fn verdict(&self) -> bool {
        !self.partial && self.metric_violations.is_empty()
    }
}

/// Runs the study, writes `member_<n>.csv` ledgers into `ledger_dir` and
/// returns the report.
pub fn run_and_write(spec: &InitialDataSpec, config: &SolverConfig, ledger_dir: &Path) -> Result<StudyReport> {
    let (seq, study, outcomes) = run_parallel(spec, config, thread_count()?)?;
    std::fs::create_dir_all(ledger_dir).map_err(|e| CliError::io(ledger_dir, e))?;
    let mut members = Vec::new();
    for o in &outcomes {
        let path = ledger_dir.join(format!("member_{}.csv", o.index));
        let ledger = match &o.result {
            Ok(out) => &out.ledger,
            Err(abort) => &abort.partial.ledger,
        };
        ledger_io::write_csv(&path, ledger, config.grid.ndim())?;
        members.push(path);
    }
    Ok(StudyReport {
        members,
        member_status: study.members.clone(),
        completed: study.completed.clone(),
        times: study.times.clone(),
        uniform_bounds: study.uniform_bounds.iter().map(|b| (b.name.clone(), b.max)).collect(),
        uniform_ratios: study.uniform_bounds.iter().map(|b| (b.name.clone(), b.ratio)).collect(),
        metric_violations: study.metric_violations(),
        d_rho: study.d_rho,
        d_u: study.d_u,
        d_m: study.d_m,
        vacuum: study.vacuum,
        vacuum_ratio: study.vacuum_ratio,
        hypotheses: seq.hypotheses,
        flagged: seq.flagged,
        eps_vac: config.eps_vac.unwrap_or(seq.eps_vac),
        delta: config.moment.delta,
        partial: study.partial,
    })
}
