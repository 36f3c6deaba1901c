//! Explicit finite-volume time stepping in conservative variables `(ρ, m)`.
//!
//! Face fluxes combine a linear reconstruction of `(ρ, u)` (central slopes,
//! switching to a monotonized central limiter near vacuum) with local
//! Lax-Friedrichs dissipation for the convective part, the mean pressure of
//! the two reconstructed face states, and compact viscous fluxes whose face
//! viscosity is the harmonic mean of the cell values, so that they switch
//! off next to vacuum.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostics, EntropyLedger, MomentParams};
use crate::error::{Error, Result};
use crate::grid::{default_eps_vac, PeriodicGrid, ScalarField, State, VectorField};
use crate::law::{default_samples, AdmissibilityParams, ValidationReport, ViscosityLaw};
use crate::num;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    SspRk2,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub law: ViscosityLaw,
    pub params: AdmissibilityParams,
    pub grid: PeriodicGrid,
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// Vacuum threshold; `None` means `1e-10 · max ρ₀`.
    #[serde(default)]
    pub eps_vac: Option<f64>,
    pub ledger_stride: usize,
    #[serde(default)]
    pub moment: MomentParams,
    #[serde(default)]
    pub allow_non_admissible: bool,
}

/// Relative floor on the time step.
pub const DT_FLOOR_REL: f64 = 1e-12;

impl SolverConfig {
    /// Shallow-water defaults: `h = ρ`, `γ = 2`, `ν = 0.9`.
    pub fn saint_venant(grid: PeriodicGrid, t_end: f64) -> Self {
        let dim = grid.dim();
        SolverConfig {
            law: ViscosityLaw::linear(),
            params: AdmissibilityParams::new(0.9, 2.0, dim, 0.1).expect("valid constants"),
            grid,
            cfl: 0.4,
            t_end,
            integrator: Integrator::SspRk2,
            eps_vac: None,
            ledger_stride: 1,
            moment: MomentParams::default(),
            allow_non_admissible: false,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    /// Checks parameter ranges and law admissibility. Returns the
    /// validation report; a failing report is an error unless
    /// `allow_non_admissible` is set.
    pub fn check(&self) -> Result<ValidationReport> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Argument(format!("cfl = {} must lie in (0, 1)", self.cfl)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Argument(format!("t_end = {} must be > 0", self.t_end)));
        }
        if self.ledger_stride == 0 {
            return Err(Error::Argument("ledger_stride must be >= 1".into()));
        }
        if self.params.dim != self.grid.dim() {
            return Err(Error::Argument(format!(
                "law dimension {} differs from grid dimension {}",
                self.params.dim,
                self.grid.dim()
            )));
        }
        if let Some(e) = self.eps_vac {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Argument(format!("eps_vac = {e} must be > 0")));
            }
        }
        self.moment.check(self.params.nu)?;
        let report = self.law.validate(&self.params, &default_samples())?;
        if !report.pass && !self.allow_non_admissible {
            let failed: Vec<&str> = report.failed().iter().map(|c| c.name()).collect();
            return Err(Error::NonAdmissibleLaw(format!("failed conditions: {}", failed.join(", "))));
        }
        Ok(report)
    }
}

/// Momentum source term, used only by manufactured-solution tests.
pub trait Forcing: Sync {
    /// Adds the source at time `t` to `dmom`.
    fn add_momentum_source(&self, grid: &PeriodicGrid, t: f64, dmom: &mut [Vec<f64>]);
}

/// Event counters accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Negative densities reset to 0 (cell-stages).
    pub clamped: usize,
    /// Nonzero momenta discarded on vacuum cells after a stage.
    pub vacuum_momentum_zeroed: usize,
    /// Nonzero momenta discarded on vacuum cells of the initial data.
    pub initial_momentum_zeroed: usize,
    /// Largest number of cells whose velocity was cut off in a ledger row.
    pub max_cutoff_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at step 0, every `ledger_stride` steps and at the end.
    pub checkpoints: Vec<State>,
    pub final_state: State,
    pub counters: Counters,
    pub steps: usize,
    pub eps_vac: f64,
    /// `(t, E)` after every step, for per-step energy monitoring.
    pub energy_trace: Vec<(f64, f64)>,
    /// Set when the law failed validation and the run went ahead anyway.
    pub non_admissible: bool,
}

impl Trajectory {
    /// Largest single-step energy increase, 0 if the energy never rises.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy_trace.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub ledger: EntropyLedger,
}

/// A failed run together with everything computed before the failure.
#[derive(Clone, Debug)]
pub struct RunAbort {
    pub error: Error,
    pub partial: RunOutput,
}

impl core::fmt::Display for RunAbort {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} (after {} steps, t = {})",
            self.error, self.partial.trajectory.steps, self.partial.trajectory.final_state.t
        )
    }
}

impl core::error::Error for RunAbort {}

pub struct Solver<'a> {
    pub config: &'a SolverConfig,
    pub eps_vac: f64,
    forcing: Option<&'a dyn Forcing>,
}

#[inline]
fn mc_slope(qm: f64, q0: f64, qp: f64) -> f64 {
    let a = q0 - qm;
    let b = qp - q0;
    if a * b <= 0.0 {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let s = if c > 0.0 { 1.0 } else { -1.0 };
    s * (2.0 * num::abs(a)).min(2.0 * num::abs(b)).min(num::abs(c))
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

impl<'a> Solver<'a> {
    pub fn new(config: &'a SolverConfig, eps_vac: f64) -> Self {
        Solver { config, eps_vac, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: &'a dyn Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    fn grid(&self) -> &PeriodicGrid {
        &self.config.grid
    }

    fn pressure(&self, r: f64) -> f64 {
        let g = self.config.gamma();
        if g == 2.0 {
            r * r
        } else {
            num::powf(r, g)
        }
    }

    fn sound_speed(&self, r: f64) -> f64 {
        let g = self.config.gamma();
        if r <= 0.0 {
            0.0
        } else if g == 2.0 {
            num::sqrt(2.0 * r)
        } else {
            num::sqrt(g * num::powf(r, g - 1.0))
        }
    }

    fn velocity(&self, st: &State) -> VectorField {
        st.mom
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&st.rho)
                    .map(|(&m, &r)| if r > self.eps_vac { m / r } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Time derivatives `(∂tρ, ∂t m)` at `state`, without forcing.
    pub fn rhs(&self, st: &State) -> Result<(ScalarField, VectorField)> {
        let grid = self.grid();
        grid.check(&st.rho)?;
        grid.check_vector(&st.mom)?;
        let d = grid.ndim();
        let n = grid.len();
        let law = &self.config.law;
        let u = self.velocity(st);
        let cs: Vec<f64> = st.rho.iter().map(|&r| self.sound_speed(r)).collect();
        let h: Vec<f64> = st.rho.iter().map(|&r| law.h(r)).collect();
        let goh: Vec<f64> = st
            .rho
            .iter()
            .zip(&h)
            .map(|(&r, &hv)| if hv > 0.0 { law.g(r) / hv } else { 0.0 })
            .collect();
        // Centered ∂_a u_a, used for the tangential part of div u on faces.
        let du: Vec<Vec<f64>> = (0..d).map(|a| grid.partial_unchecked(&u[a], a)).collect();

        let mut drho = vec![0.0; n];
        let mut dmom = vec![vec![0.0; n]; d];
        let mut s_u = vec![vec![0.0; n]; d];
        let mut s_rho = vec![0.0; n];
        let mut fm = [0.0f64; 2];
        let (mut ul, mut ur) = ([0.0f64; 2], [0.0f64; 2]);

        for a in 0..d {
            let dx = grid.spacing(a);
            let inv = 1.0 / dx;
            for c in 0..n {
                let (m1, p1) = (grid.shift(c, a, -1), grid.shift(c, a, 1));
                let (rm, r0, rp) = (st.rho[m1], st.rho[c], st.rho[p1]);
                let central = 0.5 * (rp - rm);
                // Unlimited slopes keep second order at smooth extrema; the
                // limiter takes over next to vacuum or where a face density
                // would turn negative.
                let limit = rm.min(r0).min(rp) <= self.eps_vac || r0 < 0.5 * num::abs(central);
                if limit {
                    s_rho[c] = mc_slope(rm, r0, rp);
                    for b in 0..d {
                        s_u[b][c] = mc_slope(u[b][m1], u[b][c], u[b][p1]);
                    }
                } else {
                    s_rho[c] = central;
                    for b in 0..d {
                        s_u[b][c] = 0.5 * (u[b][p1] - u[b][m1]);
                    }
                }
            }
            for c in 0..n {
                let nb = grid.shift(c, a, 1);
                let rl = st.rho[c] + 0.5 * s_rho[c];
                let rr = st.rho[nb] - 0.5 * s_rho[nb];
                for b in 0..d {
                    ul[b] = u[b][c] + 0.5 * s_u[b][c];
                    ur[b] = u[b][nb] - 0.5 * s_u[b][nb];
                }
                let alpha = (num::abs(ul[a]) + self.sound_speed(rl))
                    .max(num::abs(ur[a]) + self.sound_speed(rr))
                    .max(num::abs(u[a][c]) + cs[c])
                    .max(num::abs(u[a][nb]) + cs[nb]);
                let fr = 0.5 * (rl * ul[a] + rr * ur[a]) - 0.5 * alpha * (rr - rl);

                let hf = harmonic(h[c], h[nb]);
                let mut div_f = (u[a][nb] - u[a][c]) * inv;
                for e in 0..d {
                    if e != a {
                        div_f += 0.5 * (du[e][c] + du[e][nb]);
                    }
                }
                let gf = hf * 0.5 * (goh[c] + goh[nb]);
                for b in 0..d {
                    let (ml, mr) = (rl * ul[b], rr * ur[b]);
                    fm[b] = 0.5 * (ml * ul[a] + mr * ur[a]) - 0.5 * alpha * (mr - ml)
                        - hf * (u[b][nb] - u[b][c]) * inv;
                }
                fm[a] += 0.5 * (self.pressure(rl) + self.pressure(rr)) - gf * div_f;

                drho[c] -= fr * inv;
                drho[nb] += fr * inv;
                for b in 0..d {
                    dmom[b][c] -= fm[b] * inv;
                    dmom[b][nb] += fm[b] * inv;
                }
            }
        }
        Ok((drho, dmom))
    }

    fn full_rhs(&self, st: &State) -> Result<(ScalarField, VectorField)> {
        let (dr, mut dm) = self.rhs(st)?;
        if let Some(f) = self.forcing {
            f.add_momentum_source(self.grid(), st.t, &mut dm);
        }
        Ok((dr, dm))
    }

    /// Largest stable step: advective limit `dx/(max|u| + max c)` and
    /// diffusive limit `dx²/(2·dim·max κ)` with `κ = (h + |g|)/ρ` over
    /// non-vacuum cells, both scaled by the CFL number.
    pub fn stable_dt(&self, st: &State) -> f64 {
        let grid = self.grid();
        let law = &self.config.law;
        let dx = grid.min_spacing();
        let mut umax = 0.0f64;
        let mut cmax = 0.0f64;
        let mut kmax = 0.0f64;
        let mut any = false;
        for i in 0..st.rho.len() {
            let r = st.rho[i];
            if r > self.eps_vac {
                any = true;
                let u2: f64 = st.mom.iter().map(|c| (c[i] / r) * (c[i] / r)).sum();
                umax = umax.max(num::sqrt(u2));
                cmax = cmax.max(self.sound_speed(r));
                kmax = kmax.max((law.h(r) + num::abs(law.g(r))) / r);
            }
        }
        let dim = grid.ndim() as f64;
        if !any {
            let e = self.eps_vac;
            let k = (law.h(e) + num::abs(law.g(e))) / e;
            return self.config.cfl * dx * dx / (2.0 * dim * k.max(f64::MIN_POSITIVE));
        }
        let adv = if umax + cmax > 0.0 { dx / (umax + cmax) } else { f64::INFINITY };
        let dif = if kmax > 0.0 { dx * dx / (2.0 * dim * kmax) } else { f64::INFINITY };
        self.config.cfl * adv.min(dif)
    }

    /// Clamps negative densities and discards momentum on vacuum cells.
    fn enforce_vacuum(&self, st: &mut State, counters: &mut Counters) {
        for i in 0..st.rho.len() {
            if st.rho[i] < 0.0 {
                st.rho[i] = 0.0;
                counters.clamped += 1;
            }
            if st.rho[i] <= self.eps_vac {
                let mut hit = false;
                for c in st.mom.iter_mut() {
                    if c[i] != 0.0 {
                        c[i] = 0.0;
                        hit = true;
                    }
                }
                if hit {
                    counters.vacuum_momentum_zeroed += 1;
                }
            }
        }
    }

    fn axpy(base: &State, k: &(ScalarField, VectorField), dt: f64) -> State {
        State {
            t: base.t + dt,
            rho: base.rho.iter().zip(&k.0).map(|(a, b)| a + dt * b).collect(),
            mom: base
                .mom
                .iter()
                .zip(&k.1)
                .map(|(c, kc)| c.iter().zip(kc).map(|(a, b)| a + dt * b).collect())
                .collect(),
        }
    }

    /// Advances `st` by `dt` with the configured integrator.
    pub fn step(&self, st: &State, dt: f64, counters: &mut Counters) -> Result<State> {
        let mut out = match self.config.integrator {
            Integrator::SspRk2 => {
                let k1 = self.full_rhs(st)?;
                let mut s1 = Self::axpy(st, &k1, dt);
                self.enforce_vacuum(&mut s1, counters);
                let k2 = self.full_rhs(&s1)?;
                let s2 = Self::axpy(&s1, &k2, dt);
                State {
                    t: st.t + dt,
                    rho: st.rho.iter().zip(&s2.rho).map(|(a, b)| 0.5 * (a + b)).collect(),
                    mom: st
                        .mom
                        .iter()
                        .zip(&s2.mom)
                        .map(|(c, c2)| c.iter().zip(c2).map(|(a, b)| 0.5 * (a + b)).collect())
                        .collect(),
                }
            }
            Integrator::Rk4 => {
                let k1 = self.full_rhs(st)?;
                let k2 = self.full_rhs(&Self::axpy(st, &k1, 0.5 * dt))?;
                let k3 = self.full_rhs(&Self::axpy(st, &k2, 0.5 * dt))?;
                let k4 = self.full_rhs(&Self::axpy(st, &k3, dt))?;
                let w = dt / 6.0;
                let comb = |a: f64, b1: f64, b2: f64, b3: f64, b4: f64| a + w * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
                State {
                    t: st.t + dt,
                    rho: (0..st.rho.len())
                        .map(|i| comb(st.rho[i], k1.0[i], k2.0[i], k3.0[i], k4.0[i]))
                        .collect(),
                    mom: (0..st.mom.len())
                        .map(|b| {
                            (0..st.rho.len())
                                .map(|i| comb(st.mom[b][i], k1.1[b][i], k2.1[b][i], k3.1[b][i], k4.1[b][i]))
                                .collect()
                        })
                        .collect(),
                }
            }
        };
        self.enforce_vacuum(&mut out, counters);
        Ok(out)
    }

    fn energy(&self, st: &State) -> f64 {
        let g = self.config.gamma();
        let e: f64 = (0..st.rho.len())
            .map(|i| {
                let r = st.rho[i];
                let k = if r > self.eps_vac {
                    st.mom.iter().map(|c| c[i] * c[i]).sum::<f64>() / r
                } else {
                    0.0
                };
                0.5 * k + self.pressure(r) / (g - 1.0)
            })
            .sum();
        e * self.grid().cell_volume()
    }

    /// Runs from `initial` to `t_end`.
    pub fn run(&self, initial: &State) -> core::result::Result<RunOutput, RunAbort> {
        let cfg = self.config;
        let diag = Diagnostics {
            grid: &cfg.grid,
            law: &cfg.law,
            gamma: cfg.gamma(),
            eps_vac: self.eps_vac,
            moment: cfg.moment,
        };
        let mut counters = Counters::default();
        let mut st = initial.clone();
        let mut zeroed = Counters::default();
        self.enforce_vacuum(&mut st, &mut zeroed);
        counters.initial_momentum_zeroed = zeroed.vacuum_momentum_zeroed;
        counters.clamped = zeroed.clamped;

        let mut traj = Trajectory {
            checkpoints: Vec::new(),
            final_state: st.clone(),
            counters,
            steps: 0,
            eps_vac: self.eps_vac,
            energy_trace: vec![(st.t, self.energy(&st))],
            non_admissible: false,
        };
        let mut ledger = EntropyLedger::new(&cfg.moment);

        macro_rules! abort {
            ($e:expr, $st:expr) => {{
                let error = $e;
                traj.final_state = $st;
                traj.counters = counters;
                return Err(RunAbort { error, partial: RunOutput { trajectory: traj, ledger } });
            }};
        }
        if let Some((field, cell)) = st.first_non_finite() {
            abort!(Error::NonFinite { field, cell, time: st.t }, st);
        }

        let record = |st: &State, step: usize, counters: &mut Counters, traj: &mut Trajectory, ledger: &mut EntropyLedger| -> Result<()> {
            let row = diag.row(st, step, counters.clamped)?;
            counters.max_cutoff_cells = counters.max_cutoff_cells.max(row.cutoff_cells);
            ledger.rows.push(row);
            traj.checkpoints.push(st.clone());
            Ok(())
        };
        if let Err(e) = record(&st, 0, &mut counters, &mut traj, &mut ledger) {
            abort!(e, st);
        }

        let t0 = st.t;
        let t_end = t0 + cfg.t_end;
        let floor = DT_FLOOR_REL * cfg.t_end;
        let mut step = 0usize;
        while st.t < t_end {
            let mut dt = self.stable_dt(&st);
            let remaining = t_end - st.t;
            if dt >= remaining {
                dt = remaining;
            } else if dt < floor {
                abort!(Error::TimeStepUnderflow { dt, floor, time: st.t }, st);
            }
            let next = match self.step(&st, dt, &mut counters) {
                Ok(s) => s,
                Err(e) => abort!(e, st),
            };
            if let Some((field, cell)) = next.first_non_finite() {
                abort!(Error::NonFinite { field, cell, time: next.t }, st);
            }
            st = next;
            if remaining - dt <= 0.0 || st.t >= t_end * (1.0 - 1e-15) {
                st.t = t_end;
            }
            step += 1;
            traj.energy_trace.push((st.t, self.energy(&st)));
            let last = st.t >= t_end;
            if step % cfg.ledger_stride == 0 || last {
                if let Err(e) = record(&st, step, &mut counters, &mut traj, &mut ledger) {
                    abort!(e, st);
                }
            }
        }
        traj.steps = step;
        traj.final_state = st;
        traj.counters = counters;
        Ok(RunOutput { trajectory: traj, ledger })
    }
}

/// Validates `config` and runs it from `initial`.
pub fn run(config: &SolverConfig, initial: &State) -> Result<RunOutput> {
    run_with(config, initial, None).map_err(|a| a.error)
}

/// Like [`run`] but keeps partial results on failure and accepts forcing.
pub fn run_with(
    config: &SolverConfig,
    initial: &State,
    forcing: Option<&dyn Forcing>,
) -> core::result::Result<RunOutput, RunAbort> {
    let empty = |error: Error| RunAbort {
        error,
        partial: RunOutput {
            trajectory: Trajectory {
                checkpoints: Vec::new(),
                final_state: initial.clone(),
                counters: Counters::default(),
                steps: 0,
                eps_vac: 0.0,
                energy_trace: Vec::new(),
                non_admissible: false,
            },
            ledger: EntropyLedger::new(&config.moment),
        },
    };
    let report = config.check().map_err(empty)?;
    config.grid.check(&initial.rho).map_err(empty)?;
    config.grid.check_vector(&initial.mom).map_err(empty)?;
    let eps = config.eps_vac.unwrap_or_else(|| default_eps_vac(&initial.rho));
    let mut solver = Solver::new(config, eps);
    if let Some(f) = forcing {
        solver = solver.with_forcing(f);
    }
    let mut out = solver.run(initial);
    match &mut out {
        Ok(o) => o.trajectory.non_admissible = !report.pass,
        Err(a) => a.partial.trajectory.non_admissible = !report.pass,
    }
    out
}
