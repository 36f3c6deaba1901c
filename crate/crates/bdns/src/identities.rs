//! Batch certification of the entropy identities over dimensions, laws
//! and grids, run in parallel.

use bdns_core::law::default_samples;
use bdns_core::verify::{
    self, ComparisonReport, IdentityReport, ManufacturedField, SlackReport, TamperedPair, ViscosityPair,
};
use bdns_core::ViscosityLaw;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Uniform drift added to the moment-identity field so that `|u|` stays
/// away from 0 and the weight `|u|^δ` is smooth.
pub const MOMENT_DRIFT: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub law: ViscosityLaw,
    pub gamma: f64,
    pub dims: Vec<u32>,
    pub grids: Vec<usize>,
    /// Replaces `g` by this constant, breaking the structural relation.
    pub tamper_g: Option<f64>,
    pub deltas: Vec<f64>,
    /// Defaults to `min(0.9, largest admissible ν)` per dimension.
    pub nu: Option<f64>,
    pub seed: u64,
}

impl SuiteOptions {
    pub fn new(law: ViscosityLaw, gamma: f64) -> Self {
        SuiteOptions {
            law,
            gamma,
            dims: vec![1, 2],
            grids: vec![32, 64, 128],
            tamper_g: None,
            deltas: vec![0.01, 0.05],
            nu: None,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub identities: Vec<IdentityReport>,
    pub inequalities: Vec<SlackReport>,
    pub comparisons: Vec<ComparisonReport>,
    /// Every identity converged with spectral decay, every inequality held
    /// and every comparison matched.
    pub verdict: bool,
}

impl SuiteReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.identities {
            if !(r.verdict && r.spectral_decay) {
                out.push(format!("{} (dim {}): residuals {:?}", r.identity, r.dim, r.residuals));
            }
        }
        for s in &self.inequalities {
            if !s.pass {
                out.push(format!("{} (dim {}): slacks {:?}", s.inequality, s.dim, s.slacks));
            }
        }
        for c in &self.comparisons {
            if !c.pass {
                out.push(format!("moment limit: relative difference {:e}", c.relative_difference));
            }
        }
        out
    }
}

enum Pair {
    Law(ViscosityLaw),
    Tampered(TamperedPair),
}

impl Pair {
    fn get(&self) -> &dyn ViscosityPair {
        match self {
            Pair::Law(l) => l,
            Pair::Tampered(t) => t,
        }
    }
}

enum Job {
    Energy,
    Step2,
    Step3,
    Bd,
    Moment(f64),
    Limit,
}

#[derive(Default)]
struct Partial {
    identities: Vec<IdentityReport>,
    inequalities: Vec<SlackReport>,
    comparisons: Vec<ComparisonReport>,
}

fn nu_for(opts: &SuiteOptions, dim: u32) -> Result<f64> {
    if let Some(nu) = opts.nu {
        return Ok(nu);
    }
    let feasible = opts.law.largest_feasible_nu(opts.gamma, dim, &default_samples())?;
    feasible.map(|nu| nu.min(0.9)).ok_or_else(|| {
        CliError::Usage(format!("no admissible nu for this law in dimension {dim}; pass --nu to check the moment estimate"))
    })
}

fn run_job(opts: &SuiteOptions, dim: u32, nu: f64, job: &Job) -> Result<Partial> {
    let pair = match opts.tamper_g {
        Some(g) => Pair::Tampered(TamperedPair { law: opts.law.clone(), g }),
        None => Pair::Law(opts.law.clone()),
    };
    let pair = pair.get();
    let field = ManufacturedField::generic(dim, opts.seed)?;
    let (grids, gamma) = (&opts.grids[..], opts.gamma);
    let mut p = Partial::default();
    match *job {
        Job::Energy => p.identities.push(verify::verify_energy_step(&field, pair, gamma, grids)?),
        Job::Step2 => p.identities.push(verify::verify_step2(&field, pair, grids)?),
        Job::Step3 => p.identities.extend(verify::verify_step3_cross(&field, pair, gamma, grids)?),
        Job::Bd => {
            let r = verify::verify_bd_combination(&field, pair, gamma, grids)?;
            p.identities.extend(r.identities().into_iter().cloned());
            p.inequalities.extend(r.slacks().into_iter().cloned());
        }
        Job::Moment(delta) => {
            let drifted = field.with_drift(&vec![MOMENT_DRIFT; dim as usize])?;
            let r = verify::verify_moment_derivation(&drifted, pair, gamma, nu, delta, grids)?;
            p.identities.push(r.identity);
            p.inequalities.extend(r.links);
            p.inequalities.push(r.end_to_end);
        }
        Job::Limit => {
            let cells = *grids.last().expect("grids checked non-empty");
            p.comparisons.push(verify::moment_energy_limit(&field, pair, gamma, cells)?);
        }
    }
    Ok(p)
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    if opts.dims.is_empty() || opts.grids.is_empty() {
        return Err(CliError::Usage("need at least one dimension and one grid".into()));
    }
    let mut tasks = Vec::new();
    for &dim in &opts.dims {
        let nu = nu_for(opts, dim)?;
        let mut jobs = vec![Job::Energy, Job::Step2, Job::Step3, Job::Bd, Job::Limit];
        jobs.extend(opts.deltas.iter().map(|&d| Job::Moment(d)));
        tasks.extend(jobs.into_iter().map(|j| (dim, nu, j)));
    }
    let parts: Vec<Partial> =
        tasks.par_iter().map(|(dim, nu, job)| run_job(opts, *dim, *nu, job)).collect::<Result<_>>()?;
    let mut rep = SuiteReport {
        options: opts.clone(),
        identities: Vec::new(),
        inequalities: Vec::new(),
        comparisons: Vec::new(),
        verdict: false,
    };
    for p in parts {
        rep.identities.extend(p.identities);
        rep.inequalities.extend(p.inequalities);
        rep.comparisons.extend(p.comparisons);
    }
    rep.verdict = rep.failures().is_empty();
    Ok(rep)
}
