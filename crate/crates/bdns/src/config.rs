//! Flat JSON run configuration.
//!
//! ```json
//! {
//!   "law": {"terms": [[1.0, 1.0]]},
//!   "nu": 0.9, "gamma": 2.0, "dim": 2,
//!   "cells": [128, 128], "t_end": 0.01, "ledger_stride": 4,
//!   "initial": {"preset": "saint_venant_demo"}
//! }
//! ```
//!
//! `initial` is either a preset or `{"checkpoint": "path"}`, resolved
//! relative to the configuration file.

use std::path::{Path, PathBuf};

use bdns_core::diagnostics::MomentParams;
use bdns_core::solver::Integrator;
use bdns_core::study::InitialDataSpec;
use bdns_core::{AdmissibilityParams, InitialPreset, PeriodicGrid, SolverConfig, State, ViscosityLaw};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{CliError, Result};

fn default_eps_growth() -> f64 {
    0.1
}
fn default_cfl() -> f64 {
    0.4
}
fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSource {
    Checkpoint { checkpoint: PathBuf },
    Preset(InitialPreset),
}

/// Mollification schedule for `stability-study`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub sigma0: f64,
    pub n_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub law: ViscosityLaw,
    pub nu: f64,
    pub gamma: f64,
    pub dim: u32,
    #[serde(default = "default_eps_growth")]
    pub eps_growth: f64,
    #[serde(default)]
    pub cells: Vec<usize>,
    #[serde(default)]
    pub lengths: Option<Vec<f64>>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub eps_vac: Option<f64>,
    #[serde(default = "default_stride")]
    pub ledger_stride: usize,
    #[serde(default)]
    pub moment: MomentParams,
    #[serde(default)]
    pub allow_non_admissible: bool,
    #[serde(default)]
    pub initial: Option<InitialSource>,
    #[serde(default)]
    pub study: Option<StudySection>,
    /// Directory the file was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn params(&self) -> Result<AdmissibilityParams> {
        Ok(AdmissibilityParams::new(self.nu, self.gamma, self.dim, self.eps_growth)?)
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        if self.cells.is_empty() {
            return Err(CliError::Usage("configuration needs \"cells\"".into()));
        }
        let lengths = self.lengths.clone().unwrap_or_else(|| vec![1.0; self.cells.len()]);
        Ok(PeriodicGrid::new(self.dim, &self.cells, &lengths)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            law: self.law.clone(),
            params: self.params()?,
            grid: self.grid()?,
            cfl: self.cfl,
            t_end: self.t_end,
            integrator: self.integrator,
            eps_vac: self.eps_vac,
            ledger_stride: self.ledger_stride,
            moment: self.moment,
            allow_non_admissible: self.allow_non_admissible,
        };
        Ok(cfg)
    }

    fn preset(&self) -> Result<&InitialPreset> {
        match &self.initial {
            Some(InitialSource::Preset(p)) => Ok(p),
            Some(InitialSource::Checkpoint { .. }) => {
                Err(CliError::Usage("a stability study needs a preset base profile, not a checkpoint".into()))
            }
            None => Err(CliError::Usage("configuration needs \"initial\"".into())),
        }
    }

    /// Initial state from the preset or checkpoint, checked against the grid.
    pub fn initial_state(&self) -> Result<State> {
        let grid = self.grid()?;
        match &self.initial {
            Some(InitialSource::Checkpoint { checkpoint: p }) => {
                let path = self.base_dir.join(p);
                let (g, state) = checkpoint::read(&path)?;
                if g != grid {
                    return Err(CliError::Checkpoint {
                        path,
                        msg: "checkpoint grid differs from the configured grid".into(),
                    });
                }
                Ok(state)
            }
            _ => Ok(self.preset()?.build(&grid)?),
        }
    }

    pub fn study_spec(&self) -> Result<InitialDataSpec> {
        let s = self.study.ok_or_else(|| CliError::Usage("configuration needs a \"study\" section".into()))?;
        Ok(InitialDataSpec::new(self.preset()?.clone(), s.sigma0, s.n_max)?)
    }
}

/// Parses a law from JSON (`{"terms": [[a, b], ...]}`, `{"constant": μ}`)
/// or shorthand such as `rho`, `rho+rho^2`, `0.5*rho^1.5` or `const:1`.
pub fn parse_law(text: &str) -> Result<ViscosityLaw> {
    let t = text.trim();
    if t.starts_with('{') {
        return serde_json::from_str(t).map_err(|e| CliError::Usage(format!("law `{t}`: {e}")));
    }
    if let Some(mu) = t.strip_prefix("const:") {
        let mu: f64 = mu.trim().parse().map_err(|_| CliError::Usage(format!("bad constant in `{t}`")))?;
        return Ok(ViscosityLaw::constant(mu)?);
    }
    let mut terms = Vec::new();
    for raw in t.split('+') {
        let term = raw.trim();
        let bad = || CliError::Usage(format!("cannot parse law term `{term}`"));
        let (coef, power) = match term.split_once('*') {
            Some((c, p)) => (c.trim().parse::<f64>().map_err(|_| bad())?, p.trim()),
            None => (1.0, term),
        };
        let exp = match power.strip_prefix("rho") {
            Some("") => 1.0,
            Some(rest) => rest.strip_prefix('^').ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())?,
            None => return Err(bad()),
        };
        terms.push((coef, exp));
    }
    Ok(ViscosityLaw::power(&terms)?)
}

/// Parses `1,2,3` style lists.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad list entry `{s}` in `{text}`"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_laws() {
        assert_eq!(parse_law("rho").unwrap(), ViscosityLaw::linear());
        assert_eq!(parse_law("rho + rho^2").unwrap(), ViscosityLaw::power(&[(1.0, 1.0), (1.0, 2.0)]).unwrap());
        assert_eq!(parse_law("0.5*rho^1.5").unwrap(), ViscosityLaw::power(&[(0.5, 1.5)]).unwrap());
        assert_eq!(parse_law("const:1").unwrap(), ViscosityLaw::constant(1.0).unwrap());
        assert_eq!(parse_law(r#"{"terms": [[1, 3]]}"#).unwrap(), ViscosityLaw::power(&[(1.0, 3.0)]).unwrap());
        assert!(parse_law("rho^").is_err());
        assert!(parse_law("x^2").is_err());
        assert_eq!(parse_list::<usize>("32, 64").unwrap(), vec![32, 64]);
        assert!(parse_list::<u32>("1,a").is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "law": {"terms": [[1.0, 1.0]]}, "nu": 0.9, "gamma": 2.0, "dim": 1,
            "cells": [64], "t_end": 0.01,
            "initial": {"preset": "smooth_bump", "center": [0.5]}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.cfl, 0.4);
        assert_eq!(cfg.integrator, Integrator::SspRk2);
        let sc = cfg.solver_config().unwrap();
        assert_eq!(sc.grid.sizes(), &[64]);
        assert_eq!(cfg.initial_state().unwrap().rho.len(), 64);
        let again: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);

        let cp: RunConfig = serde_json::from_str(
            r#"{"law": {"constant": 1.0}, "nu": 0.5, "gamma": 2, "dim": 2, "initial": {"checkpoint": "x.bdns"}}"#,
        )
        .unwrap();
        assert!(matches!(cp.initial, Some(InitialSource::Checkpoint { .. })));
        assert!(serde_json::from_str::<RunConfig>(r#"{"law": {"constant": 1.0}, "nu": 0.5, "gamma": 2, "dim": 2, "typo": 1}"#).is_err());
    }
}
