//! Spectral certification of the entropy identities.
//!
//! Each check samples a [`ManufacturedField`] on a sequence of grids,
//! replaces time derivatives by what the equations prescribe
//! (`∂tρ = −div m`, `∂t m` from the momentum balance), differentiates the
//! functionals along that direction with dual numbers, and compares
//! against the closed-form right-hand sides. Nothing here calls the solver.
//!
//! Residuals are normalized by the largest single term in the balance.

mod dual;
mod field;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use dual::Dual;
pub use field::{ManufacturedField, Mode};

use crate::error::{Error, Result};
use crate::law::ViscosityLaw;
use crate::num;
use field::Frame;

/// Absolute tolerance on normalized residuals and slacks.
pub const TOL_ABS: f64 = 1e-8;
/// Fitted order that passes a report whose finest residual is above
/// [`TOL_ABS`].
pub const ORDER_MIN: f64 = 6.0;
/// Required residual reduction per grid doubling.
pub const DECAY_FACTOR: f64 = 1e-2;
/// Round-off level below which no further decay is expected.
pub const DECAY_FLOOR: f64 = 1e-11;
/// Exponent used to compare the moment identity with the energy identity.
pub const DELTA_LIMIT: f64 = 1e-6;
/// Relative tolerance of that comparison.
pub const LIMIT_REL_TOL: f64 = 1e-4;

/// A pair of viscosity coefficients with the derivatives the checks need.
/// Implemented by [`ViscosityLaw`], where `g = ρh′ − h`, and by
/// [`TamperedPair`], which breaks that relation on purpose.
pub trait ViscosityPair {
    fn h(&self, rho: f64) -> f64;
    fn h_prime(&self, rho: f64) -> f64;
    fn h_second(&self, rho: f64) -> f64;
    fn g(&self, rho: f64) -> f64;
}

impl ViscosityPair for ViscosityLaw {
    fn h(&self, rho: f64) -> f64 {
        ViscosityLaw::h(self, rho)
    }
    fn h_prime(&self, rho: f64) -> f64 {
        ViscosityLaw::h_prime(self, rho)
    }
    fn h_second(&self, rho: f64) -> f64 {
        ViscosityLaw::h_second(self, rho)
    }
    fn g(&self, rho: f64) -> f64 {
        ViscosityLaw::g(self, rho)
    }
}

/// A law's `h` paired with a constant second coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct TamperedPair {
    pub law: ViscosityLaw,
    pub g: f64,
}

impl ViscosityPair for TamperedPair {
    fn h(&self, rho: f64) -> f64 {
        self.law.h(rho)
    }
    fn h_prime(&self, rho: f64) -> f64 {
        self.law.h_prime(rho)
    }
    fn h_second(&self, rho: f64) -> f64 {
        self.law.h_second(rho)
    }
    fn g(&self, _rho: f64) -> f64 {
        self.g
    }
}

/// Residuals of one equality across grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub dim: u32,
    pub grids: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `−log r` against `log n`.
    pub order: f64,
    pub verdict: bool,
    /// Each doubling cuts the residual by [`DECAY_FACTOR`] or reaches
    /// [`DECAY_FLOOR`].
    pub spectral_decay: bool,
}

impl IdentityReport {
    fn build(identity: &str, dim: u32, grids: &[usize], residuals: Vec<f64>) -> Self {
        let clipped: Vec<f64> = residuals.iter().map(|r| r.max(1e-300)).collect();
        let order = if grids.len() > 1 { num::observed_order(grids, &clipped) } else { 0.0 };
        let finest = residuals.last().copied().unwrap_or(f64::INFINITY);
        let spectral_decay = residuals
            .windows(2)
            .all(|w| w[1] <= (w[0] * DECAY_FACTOR).max(DECAY_FLOOR));
        IdentityReport {
            identity: identity.to_string(),
            dim,
            grids: grids.to_vec(),
            residuals,
            order,
            verdict: finest < TOL_ABS || order >= ORDER_MIN,
            spectral_decay,
        }
    }

    pub fn finest(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Normalized slack of one inequality across grids; nonnegative means the
/// inequality holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackReport {
    pub inequality: String,
    pub dim: u32,
    pub grids: Vec<usize>,
    pub slacks: Vec<f64>,
    pub pass: bool,
    /// Every slack exceeds the tolerance, so the inequality is strict.
    pub strict: bool,
}

impl SlackReport {
    fn build(inequality: &str, dim: u32, grids: &[usize], slacks: Vec<f64>) -> Self {
        SlackReport {
            inequality: inequality.to_string(),
            dim,
            grids: grids.to_vec(),
            pass: slacks.iter().all(|&s| s >= -TOL_ABS),
            strict: slacks.iter().all(|&s| s > TOL_ABS),
            slacks,
        }
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// The BD combination: the equality chain, the combined rate identity and
/// the resulting inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdReport {
    /// `−∫∇φ·div(ρu⊗u) + ∫φ′(div ρu)² = ∫g(div u)² + ∫h ∂_iu_j ∂_ju_i`.
    pub equality_chain: IdentityReport,
    /// `d/dt ∫(ρu·∇φ + ½ρ|∇φ|²) + ∫∇φ·∇ρ^γ = ∫g(div u)² + ∫h ∂_iu_j ∂_ju_i`.
    pub combined: IdentityReport,
    /// `∫h(|∇u|² − ∂_iu_j ∂_ju_i) ≥ 0`.
    pub symmetry_slack: SlackReport,
    /// `d/dt E_BD + ∫∇φ·∇ρ^γ ≤ 0`.
    pub entropy_decay: SlackReport,
    /// The weaker `d/dt E_BD + ∫∇φ·∇ρ^γ ≤ ∫h|∇u|² + ∫g(div u)²`.
    pub dissipation_bound: SlackReport,
}

impl BdReport {
    pub fn identities(&self) -> [&IdentityReport; 2] {
        [&self.equality_chain, &self.combined]
    }

    pub fn slacks(&self) -> [&SlackReport; 3] {
        [&self.symmetry_slack, &self.entropy_decay, &self.dissipation_bound]
    }
}

/// The moment identity, each inequality link of the estimate, and the
/// end-to-end bound `d/dt M + (ν/4)∫h|u|^δ|∇u|² ≤ C_ν · rhs` with
/// `C_ν = (√N+δ)²/ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub delta: f64,
    pub nu: f64,
    pub identity: IdentityReport,
    pub links: Vec<SlackReport>,
    pub end_to_end: SlackReport,
}

/// Moment-identity rate at a tiny exponent against the kinetic-energy rate
/// implied by the energy identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub delta: f64,
    pub cells: usize,
    pub moment_rate: f64,
    pub kinetic_rate: f64,
    pub relative_difference: f64,
    pub pass: bool,
}

/// `lhs` against `Σ terms`.
struct Balance {
    lhs: f64,
    terms: Vec<f64>,
}

impl Balance {
    fn new(lhs: f64, terms: Vec<f64>) -> Self {
        Balance { lhs, terms }
    }

    fn residual(&self) -> f64 {
        let diff = num::abs(self.lhs - self.terms.iter().sum::<f64>());
        let scale = self.terms.iter().fold(num::abs(self.lhs), |m, t| m.max(num::abs(*t)));
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

/// `value ≥ 0`, normalized by `scale`.
fn slack(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

fn check_grids(grids: &[usize]) -> Result<()> {
    if grids.is_empty() || grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("grid sizes must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::Domain { what: "adiabatic exponent", value: gamma });
    }
    Ok(())
}

/// Evaluates `eval` on every grid and transposes the per-grid rows.
fn per_grid<T, F>(field: &ManufacturedField, grids: &[usize], mut eval: F) -> Result<Vec<Vec<T>>>
where
    F: FnMut(usize) -> Result<Vec<T>>,
{
    check_grids(grids)?;
    let mut cols: Vec<Vec<T>> = Vec::new();
    for &n in grids {
        field.grid(n)?;
        for (i, v) in eval(n)?.into_iter().enumerate() {
            if cols.len() <= i {
                cols.push(Vec::new());
            }
            cols[i].push(v);
        }
    }
    Ok(cols)
}

fn energy_balance(fr: &Frame) -> Balance {
    let mo = fr.momentum();
    let gamma = mo.gamma;
    let rho = fr.rho_dual();
    let m = fr.mom_dual();
    let lhs = fr.integral_dual(|k| {
        let m2: Dual = m.iter().map(|c| c[k] * c[k]).sum();
        m2 * 0.5 / rho[k] + rho[k].powf(gamma) * (1.0 / (gamma - 1.0))
    });
    let t1 = -fr.integral(|k| fr.h[k] * fr.grad_u_sq(k));
    let t2 = -fr.integral(|k| fr.g[k] * fr.div_u[k] * fr.div_u[k]);
    Balance::new(lhs.d, alloc::vec![t1, t2])
}

/// `d/dt ∫ ½ρ|u|² + ρ^γ/(γ−1) = −∫h|∇u|² − ∫g(div u)²`.
pub fn verify_energy_step(
    field: &ManufacturedField,
    pair: &dyn ViscosityPair,
    gamma: f64,
    grids: &[usize],
) -> Result<IdentityReport> {
    check_gamma(gamma)?;
    let cols = per_grid(field, grids, |n| {
        let fr = Frame::new(field, n, pair, Some(gamma))?;
        Ok(alloc::vec![energy_balance(&fr).residual()])
    })?;
    Ok(IdentityReport::build("energy", field.dim(), grids, cols.into_iter().next().unwrap_or_default()))
}

fn step2_balance(fr: &Frame, gphi: &[Vec<Dual>]) -> Balance {
    let rho = fr.rho_dual();
    let lhs = fr.integral_dual(|k| {
        let s: Dual = gphi.iter().map(|c| c[k] * c[k]).sum();
        rho[k] * s * 0.5
    });
    let d = fr.d;
    let t1 = -fr.integral(|k| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += fr.du[i][j][k] * fr.grad_phi[i][k] * fr.grad_phi[j][k];
            }
        }
        fr.rho[k] * s
    });
    let t2 = fr.integral(|k| fr.rho[k] * fr.rho[k] * fr.phi_p[k] * fr.lap_phi[k] * fr.div_u[k]);
    let t3 = fr.integral(|k| fr.rho[k] * Frame::dot(&fr.grad_phi, &fr.grad_phi, k) * fr.div_u[k]);
    Balance::new(lhs.d, alloc::vec![t1, t2, t3])
}

/// `d/dt ∫ ½ρ|∇φ|² = −∫ρ∇u:∇φ⊗∇φ + ∫ρ²φ′Δφ div u + ∫ρ|∇φ|² div u`.
pub fn verify_step2(field: &ManufacturedField, pair: &dyn ViscosityPair, grids: &[usize]) -> Result<IdentityReport> {
    let cols = per_grid(field, grids, |n| {
        let fr = Frame::new(field, n, pair, None)?;
        let gphi = fr.grad_phi_dual()?;
        Ok(alloc::vec![step2_balance(&fr, &gphi).residual()])
    })?;
    Ok(IdentityReport::build("bd_gradient_rate", field.dim(), grids, cols.into_iter().next().unwrap_or_default()))
}

/// `∫ ∂_i h ∂_j u_i ∂_j φ`.
fn h_transport(fr: &Frame) -> f64 {
    let d = fr.d;
    fr.integral(|k| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += fr.grad_h[i][k] * fr.du[j][i][k] * fr.grad_phi[j][k];
            }
        }
        s
    })
}

fn cross_balances(fr: &Frame, gphi: &[Vec<Dual>]) -> [Balance; 4] {
    let mo = fr.momentum();
    let m = fr.mom_dual();
    let lhs = fr.integral_dual(|k| m.iter().zip(gphi).map(|(a, b)| a[k] * b[k]).sum());
    let dphi_mt = fr.integral(|k| Frame::dot(&fr.grad_phi, &mo.m_t, k));
    let divm2 = fr.integral(|k| fr.div_m[k] * fr.div_m[k] * fr.phi_p[k]);
    let cross = Balance::new(lhs.d, alloc::vec![dphi_mt, divm2]);

    let g_lhs = fr.integral(|k| Frame::dot(&mo.visc_g, &fr.grad_phi, k));
    let g_lap = -fr.integral(|k| fr.g[k] * fr.lap_phi[k] * fr.div_u[k]);
    let g_pair = Balance::new(g_lhs, alloc::vec![g_lap]);

    let h_lhs = fr.integral(|k| Frame::dot(&mo.visc_h, &fr.grad_phi, k));
    let h_tr = h_transport(fr);
    let h_div = -fr.integral(|k| fr.div_u[k] * Frame::dot(&fr.grad_h, &fr.grad_phi, k));
    let h_lap = -fr.integral(|k| fr.h[k] * fr.lap_phi[k] * fr.div_u[k]);
    let h_pair = Balance::new(h_lhs, alloc::vec![h_tr, h_div, h_lap]);

    let lap = -fr.integral(|k| (fr.h[k] + fr.g[k]) * fr.lap_phi[k] * fr.div_u[k]);
    let press = -fr.integral(|k| Frame::dot(&fr.grad_phi, &mo.grad_p, k));
    let conv = -fr.integral(|k| Frame::dot(&fr.grad_phi, &mo.conv, k));
    let multiplied = Balance::new(dphi_mt, alloc::vec![lap, h_tr, h_div, press, conv]);
    [cross, g_pair, h_pair, multiplied]
}

/// Names of the reports returned by [`verify_step3_cross`], in order.
pub const STEP3_IDENTITIES: [&str; 4] =
    ["cross_derivative", "g_diffusion_pairing", "h_diffusion_pairing", "multiplied_momentum"];

/// The time derivative of `∫ρu·∇φ`, the two diffusion pairings after
/// integration by parts, and the momentum equation tested against `∇φ`.
pub fn verify_step3_cross(
    field: &ManufacturedField,
    pair: &dyn ViscosityPair,
    gamma: f64,
    grids: &[usize],
) -> Result<Vec<IdentityReport>> {
    check_gamma(gamma)?;
    let cols = per_grid(field, grids, |n| {
        let fr = Frame::new(field, n, pair, Some(gamma))?;
        let gphi = fr.grad_phi_dual()?;
        Ok(cross_balances(&fr, &gphi).iter().map(Balance::residual).collect())
    })?;
    Ok(cols
        .into_iter()
        .zip(STEP3_IDENTITIES)
        .map(|(r, name)| IdentityReport::build(name, field.dim(), grids, r))
        .collect())
}

/// The equality chain, the combined BD rate identity and the inequalities
/// that follow from them.
pub fn verify_bd_combination(
    field: &ManufacturedField,
    pair: &dyn ViscosityPair,
    gamma: f64,
    grids: &[usize],
) -> Result<BdReport> {
    check_gamma(gamma)?;
    let cols = per_grid(field, grids, |n| {
        let fr = Frame::new(field, n, pair, Some(gamma))?;
        let mo = fr.momentum();
        let gphi = fr.grad_phi_dual()?;
        let rho = fr.rho_dual();
        let m = fr.mom_dual();

        let g_div = fr.integral(|k| fr.g[k] * fr.div_u[k] * fr.div_u[k]);
        let h_tr = fr.integral(|k| fr.h[k] * fr.grad_u_transpose(k));
        let h_full = fr.integral(|k| fr.h[k] * fr.grad_u_sq(k));
        let conv = -fr.integral(|k| Frame::dot(&fr.grad_phi, &mo.conv, k));
        let divm2 = fr.integral(|k| fr.phi_p[k] * fr.div_m[k] * fr.div_m[k]);
        let chain = Balance::new(conv + divm2, alloc::vec![g_div, h_tr]);

        let x_bd = fr.integral(|k| Frame::dot(&fr.grad_phi, &mo.grad_p, k));
        let bd_part = fr.integral_dual(|k| {
            let mut s = Dual::default();
            let mut q = Dual::default();
            for a in 0..fr.d {
                s = s + m[a][k] * gphi[a][k];
                q = q + gphi[a][k] * gphi[a][k];
            }
            s + rho[k] * q * 0.5
        });
        let combined = Balance::new(bd_part.d + x_bd, alloc::vec![g_div, h_tr]);

        let e = energy_balance(&fr);
        let bd_rate = e.lhs + bd_part.d;
        let visc = h_full + g_div;
        let scale = [bd_rate, x_bd, visc, h_full, h_tr].iter().fold(0.0f64, |s, v| s.max(num::abs(*v)));
        Ok(alloc::vec![
            chain.residual(),
            combined.residual(),
            slack(h_full - h_tr, h_full.max(num::abs(h_tr))),
            slack(-(bd_rate + x_bd), scale),
            slack(visc - (bd_rate + x_bd), scale),
        ])
    })?;
    let dim = field.dim();
    let mut it = cols.into_iter();
    let mut next = || it.next().unwrap_or_default();
    Ok(BdReport {
        equality_chain: IdentityReport::build("bd_equality_chain", dim, grids, next()),
        combined: IdentityReport::build("bd_combined_rate", dim, grids, next()),
        symmetry_slack: SlackReport::build("transpose_gradient_bound", dim, grids, next()),
        entropy_decay: SlackReport::build("bd_entropy_decay", dim, grids, next()),
        dissipation_bound: SlackReport::build("bd_entropy_below_dissipation", dim, grids, next()),
    })
}

/// `(∫(ρ^{2γ−δ/2}/h)^{2/(2−δ)})^{(2−δ)/2} (∫ρ|u|²)^{δ/2}`.
fn holder_rhs(fr: &Frame, gamma: f64, delta: f64) -> f64 {
    let q = 2.0 / (2.0 - delta);
    let a = fr.integral(|k| {
        let r = fr.rho[k];
        num::powf(num::powf(r, 2.0 * gamma - 0.5 * delta) / fr.h[k], q)
    });
    let b = fr.integral(|k| fr.rho[k] * fr.u_sq(k));
    num::powf(a, 1.0 / q) * num::powf(b, 0.5 * delta)
}

/// Pointwise terms of the moment identity and the quantities of the
/// estimate, on one grid.
struct MomentTerms {
    rate: f64,
    terms: Vec<f64>,
    /// `∫h|u|^δ|∇u|²`.
    i_h: f64,
    /// `∫ρ^γ|u|^δ|∇u|`.
    j: f64,
    /// `∫ρ^{2γ}/h |u|^δ`.
    k: f64,
    holder: f64,
    /// `min (N|∇u|² − (div u)²)` over cells, normalized.
    div_slack: f64,
}

fn moment_terms(fr: &Frame, delta: f64) -> MomentTerms {
    let mo = fr.momentum();
    let gamma = mo.gamma;
    let rho = fr.rho_dual();
    let m = fr.mom_dual();
    let rate = fr
        .integral_dual(|k| {
            let m2: Dual = m.iter().map(|c| c[k] * c[k]).sum();
            m2.powf(1.0 + 0.5 * delta) * rho[k].powf(-1.0 - delta) * (1.0 / (2.0 + delta))
        })
        .d;
    let d = fr.d;
    let ud = |k: usize| num::powf(fr.u_sq(k), 0.5 * delta);
    // |u|^{δ−2}, set to 0 where u vanishes.
    let ud2 = |k: usize| {
        let s = fr.u_sq(k);
        if s > 0.0 {
            num::powf(s, 0.5 * delta - 1.0)
        } else {
            0.0
        }
    };
    // Σ_{i,j,k} u_i u_k ∂_j u_i ∂_j u_k = Σ_j (u·∂_j u)².
    let quad = |k: usize| {
        (0..d)
            .map(|j| {
                let s: f64 = (0..d).map(|i| fr.u[i][k] * fr.du[j][i][k]).sum();
                s * s
            })
            .sum::<f64>()
    };
    // Σ_{j,k} u_j u_k ∂_j u_k = u·(u·∇)u.
    let adv = |k: usize| {
        let mut s = 0.0;
        for j in 0..d {
            for l in 0..d {
                s += fr.u[j][k] * fr.u[l][k] * fr.du[j][l][k];
            }
        }
        s
    };
    let i_h = fr.integral(|k| fr.h[k] * ud(k) * fr.grad_u_sq(k));
    let terms = alloc::vec![
        -i_h,
        -delta * fr.integral(|k| fr.h[k] * ud2(k) * quad(k)),
        -fr.integral(|k| fr.g[k] * ud(k) * fr.div_u[k] * fr.div_u[k]),
        -delta * fr.integral(|k| fr.g[k] * ud2(k) * fr.div_u[k] * adv(k)),
        -fr.integral(|k| ud(k) * Frame::dot(&fr.u, &mo.grad_p, k)),
    ];
    let j = fr.integral(|k| num::powf(fr.rho[k], gamma) * ud(k) * num::sqrt(fr.grad_u_sq(k)));
    let kk = fr.integral(|k| num::powf(fr.rho[k], 2.0 * gamma) / fr.h[k] * ud(k));
    let n = d as f64;
    let mut worst = f64::INFINITY;
    let mut top = 0.0f64;
    for k in 0..fr.grid.len() {
        let full = n * fr.grad_u_sq(k);
        worst = worst.min(full - fr.div_u[k] * fr.div_u[k]);
        top = top.max(full);
    }
    MomentTerms {
        rate,
        terms,
        i_h,
        j,
        k: kk,
        holder: holder_rhs(fr, gamma, delta),
        div_slack: slack(worst, top),
    }
}

/// Names of the inequality links in [`MomentReport::links`], in order.
pub const MOMENT_LINKS: [&str; 6] = [
    "divergence_bound",
    "viscous_absorption",
    "pressure_bound",
    "cauchy_schwarz",
    "young",
    "holder",
];

/// The moment identity for `M = ∫ρ|u|^{2+δ}/(2+δ)`, the chain of
/// inequalities behind the moment estimate and its end-to-end form.
///
/// Needs `0 < δ < ν/4` and a field whose velocity does not vanish on an
/// open set (the weight `|u|^{δ−2}` is set to 0 where `u = 0`).
pub fn verify_moment_derivation(
    field: &ManufacturedField,
    pair: &dyn ViscosityPair,
    gamma: f64,
    nu: f64,
    delta: f64,
    grids: &[usize],
) -> Result<MomentReport> {
    check_gamma(gamma)?;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain { what: "nu", value: nu });
    }
    crate::diagnostics::check_delta(delta, nu)?;
    let n = field.dim() as f64;
    let lead = num::sqrt(n) + delta;
    let c_nu = lead * lead / nu;
    let cols = per_grid(field, grids, |cells| {
        let fr = Frame::new(field, cells, pair, Some(gamma))?;
        let t = moment_terms(&fr, delta);
        let viscous: f64 = t.terms[..4].iter().sum();
        let press = t.terms[4];
        let cs = num::sqrt(t.i_h * t.k);
        let young = 0.25 * nu * t.i_h + c_nu * t.k;
        let rate_scale = t.terms.iter().fold(num::abs(t.rate), |m, v| m.max(num::abs(*v)));
        let end_scale = rate_scale.max(c_nu * t.holder).max(0.25 * nu * t.i_h);
        Ok(alloc::vec![
            Balance::new(t.rate, t.terms.clone()).residual(),
            t.div_slack,
            slack(-viscous - 0.5 * nu * t.i_h, t.i_h.max(num::abs(viscous))),
            slack(lead * t.j - num::abs(press), lead * t.j),
            slack(cs - t.j, cs),
            slack(young - lead * cs, young),
            slack(t.holder - t.k, t.holder),
            slack(c_nu * t.holder - t.rate - 0.25 * nu * t.i_h, end_scale),
        ])
    })?;
    let dim = field.dim();
    let mut it = cols.into_iter();
    let identity = IdentityReport::build("moment", dim, grids, it.next().unwrap_or_default());
    let links = MOMENT_LINKS
        .iter()
        .map(|name| SlackReport::build(name, dim, grids, it.next().unwrap_or_default()))
        .collect();
    let end_to_end = SlackReport::build("moment_estimate", dim, grids, it.next().unwrap_or_default());
    Ok(MomentReport { delta, nu, identity, links, end_to_end })
}

/// Compares `d/dt M` at `δ = DELTA_LIMIT` with the kinetic-energy rate
/// `−∫h|∇u|² − ∫g(div u)² − d/dt ∫ρ^γ/(γ−1)` from the energy identity.
pub fn moment_energy_limit(
    field: &ManufacturedField,
    pair: &dyn ViscosityPair,
    gamma: f64,
    cells: usize,
) -> Result<ComparisonReport> {
    check_gamma(gamma)?;
    let fr = Frame::new(field, cells, pair, Some(gamma))?;
    let t = moment_terms(&fr, DELTA_LIMIT);
    let e = energy_balance(&fr);
    let rho = fr.rho_dual();
    let potential = fr.integral_dual(|k| rho[k].powf(gamma) * (1.0 / (gamma - 1.0))).d;
    let kinetic_rate = e.terms.iter().sum::<f64>() - potential;
    let scale = num::abs(t.rate).max(num::abs(kinetic_rate));
    let relative_difference = slack(num::abs(t.rate - kinetic_rate), scale);
    Ok(ComparisonReport {
        delta: DELTA_LIMIT,
        cells,
        moment_rate: t.rate,
        kinetic_rate,
        relative_difference,
        pass: relative_difference <= LIMIT_REL_TOL,
    })
}
