//! Band-limited manufactured fields on the unit torus and the spectral
//! frame of derived quantities the identity checks are assembled from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dual::Dual;
use super::ViscosityPair;
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::num;
use crate::spectral;

/// `amp · cos(2π k·x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [i32; 2],
    pub amp: f64,
    pub phase: f64,
}

impl Mode {
    pub fn new(k: [i32; 2], amp: f64, phase: f64) -> Self {
        Mode { k, amp, phase }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.amp * num::cos(2.0 * PI * (self.k[0] as f64 * x[0] + self.k[1] as f64 * x[1]) + self.phase)
    }
}

/// A finite Fourier sum for the density, kept strictly positive, and one
/// per velocity component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedField {
    dim: u32,
    rho_mean: f64,
    rho_modes: Vec<Mode>,
    u_mean: Vec<f64>,
    u_modes: Vec<Vec<Mode>>,
}

fn sum_modes(mean: f64, modes: &[Mode], x: [f64; 2]) -> f64 {
    mean + modes.iter().map(|m| m.eval(x)).sum::<f64>()
}

fn random_modes(rng: &mut ChaCha8Rng, dim: u32, count: usize, kmax: i32) -> Vec<Mode> {
    (0..count)
        .map(|_| {
            let mut k = [0i32; 2];
            while k == [0, 0] {
                k[0] = rng.random_range(0..=kmax);
                k[1] = if dim == 2 { rng.random_range(-kmax..=kmax) } else { 0 };
            }
            Mode::new(k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI))
        })
        .collect()
}

fn rescale(modes: &mut [Mode], total: f64) {
    let s: f64 = modes.iter().map(|m| num::abs(m.amp)).sum();
    if s > 0.0 {
        for m in modes {
            m.amp *= total / s;
        }
    }
}

impl ManufacturedField {
    pub fn new(
        dim: u32,
        rho_mean: f64,
        rho_modes: Vec<Mode>,
        u_mean: Vec<f64>,
        u_modes: Vec<Vec<Mode>>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Argument(format!("manufactured fields need dimension 1 or 2, got {dim}")));
        }
        let d = dim as usize;
        if u_mean.len() != d || u_modes.len() != d {
            return Err(Error::Argument(format!("velocity needs {d} components")));
        }
        let all = rho_modes.iter().chain(u_modes.iter().flatten());
        for m in all {
            if !(m.amp.is_finite() && m.phase.is_finite()) || (d == 1 && m.k[1] != 0) {
                return Err(Error::Argument(format!("invalid mode {m:?} for a {d}-d field")));
            }
        }
        if !rho_mean.is_finite() || u_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("field means must be finite".into()));
        }
        let f = ManufacturedField { dim, rho_mean, rho_modes, u_mean, u_modes };
        if !(f.rho_min() > 0.0) {
            return Err(Error::Argument(format!(
                "density lower bound {} must be positive",
                f.rho_min()
            )));
        }
        Ok(f)
    }

    /// Uniform density and velocity.
    pub fn uniform(dim: u32, rho: f64, u: &[f64]) -> Result<Self> {
        Self::new(dim, rho, Vec::new(), u.to_vec(), vec![Vec::new(); u.len()])
    }

    /// `ρ = 1 + ½ sin 2πx`, `u = cos 2πx`.
    pub fn simple_1d() -> Self {
        Self::new(
            1,
            1.0,
            vec![Mode::new([1, 0], 0.5, -0.5 * PI)],
            vec![0.0],
            vec![vec![Mode::new([1, 0], 1.0, 0.0)]],
        )
        .expect("positive by construction")
    }

    /// Seeded density with three modes up to wavenumber 2 and total
    /// amplitude ½ around mean 1, and velocity with a mean drift plus three
    /// modes per component.
    pub fn generic(dim: u32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho_modes = random_modes(&mut rng, dim, 3, 2);
        rescale(&mut rho_modes, 0.5);
        let d = dim as usize;
        let mut u_mean = Vec::with_capacity(d);
        let mut u_modes = Vec::with_capacity(d);
        for _ in 0..d {
            u_mean.push(rng.random_range(-0.3..0.3));
            let mut m = random_modes(&mut rng, dim, 3, 2);
            rescale(&mut m, 0.8);
            u_modes.push(m);
        }
        Self::new(dim, 1.0, rho_modes, u_mean, u_modes)
    }

    /// Seeded density as in [`generic`](Self::generic) with `u ≡ 0`.
    pub fn at_rest(dim: u32, seed: u64) -> Result<Self> {
        let g = Self::generic(dim, seed)?;
        Self::new(dim, g.rho_mean, g.rho_modes, vec![0.0; dim as usize], vec![Vec::new(); dim as usize])
    }

    /// `ρ = 1 + 0.3 cos 2π(x+y) + 0.2 sin 2π(x−2y)` with the rotation
    /// `u = (−sin 2πy, sin 2πx)`.
    pub fn rotational_2d() -> Self {
        Self::new(
            2,
            1.0,
            vec![Mode::new([1, 1], 0.3, 0.0), Mode::new([1, -2], 0.2, -0.5 * PI)],
            vec![0.0, 0.0],
            vec![vec![Mode::new([0, 1], 1.0, 0.5 * PI)], vec![Mode::new([1, 0], 1.0, -0.5 * PI)]],
        )
        .expect("positive by construction")
    }

    /// Adds `drift` to the mean velocity.
    pub fn with_drift(mut self, drift: &[f64]) -> Result<Self> {
        if drift.len() != self.dim as usize || drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("drift needs {} finite components", self.dim)));
        }
        for (m, d) in self.u_mean.iter_mut().zip(drift) {
            *m += d;
        }
        Ok(self)
    }

    /// Lower bound `|mean| − Σ|amp|` of the first velocity component;
    /// positive means `u` never vanishes.
    pub fn speed_floor(&self) -> f64 {
        num::abs(self.u_mean[0]) - self.u_modes[0].iter().map(|m| num::abs(m.amp)).sum::<f64>()
    }

    /// Seeded density with a gradient velocity `u = ∇χ`, so `∇u` is a
    /// symmetric Hessian.
    pub fn gradient_flow(dim: u32, seed: u64) -> Result<Self> {
        let g = Self::generic(dim, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let chi = random_modes(&mut rng, dim, 3, 2);
        let d = dim as usize;
        let u_modes = (0..d)
            .map(|j| {
                chi.iter()
                    .filter(|m| m.k[j] != 0)
                    .map(|m| {
                        let kk = num::sqrt((m.k[0] * m.k[0] + m.k[1] * m.k[1]) as f64);
                        let a = 0.5 * m.amp / (2.0 * PI * kk);
                        Mode::new(m.k, a * 2.0 * PI * m.k[j] as f64, m.phase + 0.5 * PI)
                    })
                    .collect()
            })
            .collect();
        Self::new(dim, g.rho_mean, g.rho_modes, vec![0.0; d], u_modes)
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Rigorous lower bound `mean − Σ|amp|` of the density.
    pub fn rho_min(&self) -> f64 {
        self.rho_mean - self.rho_modes.iter().map(|m| num::abs(m.amp)).sum::<f64>()
    }

    /// Largest wavenumber along any axis.
    pub fn max_wavenumber(&self) -> u32 {
        self.rho_modes
            .iter()
            .chain(self.u_modes.iter().flatten())
            .map(|m| m.k[0].unsigned_abs().max(m.k[1].unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Unit torus with `n` cells per axis, checked against the band limit
    /// of a quarter of the Nyquist wavenumber.
    pub fn grid(&self, n: usize) -> Result<PeriodicGrid> {
        if (self.max_wavenumber() as usize) * 8 > n {
            return Err(Error::Argument(format!(
                "{n} cells resolve wavenumbers up to {}, field needs {}",
                n / 8,
                self.max_wavenumber()
            )));
        }
        if self.dim == 1 {
            PeriodicGrid::line(n)
        } else {
            PeriodicGrid::square(n)
        }
    }

    /// Density and velocity sampled at cell centers.
    pub fn sample(&self, grid: &PeriodicGrid) -> (ScalarField, VectorField) {
        let rho = grid.sample(|x| sum_modes(self.rho_mean, &self.rho_modes, x));
        let u = (0..self.dim as usize)
            .map(|a| grid.sample(|x| sum_modes(self.u_mean[a], &self.u_modes[a], x)))
            .collect();
        (rho, u)
    }
}

/// Momentum-equation quantities; only built when a pressure law is given.
pub(crate) struct Momentum {
    pub gamma: f64,
    pub grad_p: VectorField,
    /// `div(ρu⊗u)_j = ∂_i(m_i u_j)`.
    pub conv: VectorField,
    /// `∂_i(h ∂_i u_j)`.
    pub visc_h: VectorField,
    /// `∂_j(g div u)`.
    pub visc_g: VectorField,
    /// `∂t m` read off the momentum equation.
    pub m_t: VectorField,
}

/// Spectrally differentiated fields at one instant.
pub(crate) struct Frame {
    pub grid: PeriodicGrid,
    pub d: usize,
    pub rho: ScalarField,
    pub u: VectorField,
    pub m: VectorField,
    /// `du[i][j] = ∂_i u_j`.
    pub du: Vec<VectorField>,
    pub div_u: ScalarField,
    pub div_m: ScalarField,
    pub grad_rho: VectorField,
    pub h: ScalarField,
    pub hp: ScalarField,
    pub hpp: ScalarField,
    pub g: ScalarField,
    pub grad_h: VectorField,
    /// `φ′ = h′/ρ`.
    pub phi_p: ScalarField,
    pub grad_phi: VectorField,
    pub lap_phi: ScalarField,
    /// `∂t ρ = −div m`.
    pub rho_t: ScalarField,
    pub mom: Option<Momentum>,
}

fn dx(grid: &PeriodicGrid, f: &[f64], axis: usize) -> Result<ScalarField> {
    spectral::derivative(grid, f, axis, 1)
}

fn mul(a: &[f64], b: &[f64]) -> ScalarField {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

impl Frame {
    pub fn new(
        field: &ManufacturedField,
        n: usize,
        pair: &dyn ViscosityPair,
        gamma: Option<f64>,
    ) -> Result<Self> {
        let grid = field.grid(n)?;
        let d = grid.ndim();
        let (rho, u) = field.sample(&grid);
        let m: VectorField = u.iter().map(|c| mul(c, &rho)).collect();
        let du = (0..d)
            .map(|i| u.iter().map(|uj| dx(&grid, uj, i)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let div_u: ScalarField = (0..grid.len()).map(|k| (0..d).map(|i| du[i][i][k]).sum()).collect();
        let div_m = spectral::spectral_div(&grid, &m)?;
        let grad_rho = spectral::spectral_grad(&grid, &rho)?;
        let h: ScalarField = rho.iter().map(|&r| pair.h(r)).collect();
        let hp: ScalarField = rho.iter().map(|&r| pair.h_prime(r)).collect();
        let hpp: ScalarField = rho.iter().map(|&r| pair.h_second(r)).collect();
        let g: ScalarField = rho.iter().map(|&r| pair.g(r)).collect();
        let grad_h = spectral::spectral_grad(&grid, &h)?;
        let phi_p: ScalarField = hp.iter().zip(&rho).map(|(a, r)| a / r).collect();
        let grad_phi: VectorField = grad_rho.iter().map(|c| mul(c, &phi_p)).collect();
        let lap_phi = spectral::spectral_div(&grid, &grad_phi)?;
        let rho_t: ScalarField = div_m.iter().map(|v| -v).collect();

        let mom = match gamma {
            None => None,
            Some(gamma) => {
                let p: ScalarField = rho.iter().map(|&r| num::powf(r, gamma)).collect();
                let grad_p = spectral::spectral_grad(&grid, &p)?;
                let gdiv = mul(&g, &div_u);
                let mut conv = Vec::with_capacity(d);
                let mut visc_h = Vec::with_capacity(d);
                let mut visc_g = Vec::with_capacity(d);
                for j in 0..d {
                    let mut c = grid.zeros();
                    let mut v = grid.zeros();
                    for i in 0..d {
                        for (o, t) in c.iter_mut().zip(dx(&grid, &mul(&m[i], &u[j]), i)?) {
                            *o += t;
                        }
                        for (o, t) in v.iter_mut().zip(dx(&grid, &mul(&h, &du[i][j]), i)?) {
                            *o += t;
                        }
                    }
                    conv.push(c);
                    visc_h.push(v);
                    visc_g.push(dx(&grid, &gdiv, j)?);
                }
                let m_t = (0..d)
                    .map(|j| {
                        (0..grid.len())
                            .map(|k| -conv[j][k] - grad_p[j][k] + visc_h[j][k] + visc_g[j][k])
                            .collect()
                    })
                    .collect();
                Some(Momentum { gamma, grad_p, conv, visc_h, visc_g, m_t })
            }
        };

        Ok(Frame {
            grid,
            d,
            rho,
            u,
            m,
            du,
            div_u,
            div_m,
            grad_rho,
            h,
            hp,
            hpp,
            g,
            grad_h,
            phi_p,
            grad_phi,
            lap_phi,
            rho_t,
            mom,
        })
    }

    pub fn momentum(&self) -> &Momentum {
        self.mom.as_ref().expect("frame built with a pressure law")
    }

    /// Midpoint quadrature of a pointwise expression.
    pub fn integral<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        (0..self.grid.len()).map(f).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn integral_dual<F: Fn(usize) -> Dual>(&self, f: F) -> Dual {
        (0..self.grid.len()).map(f).sum::<Dual>() * self.grid.cell_volume()
    }

    /// Density carrying its time derivative.
    pub fn rho_dual(&self) -> Vec<Dual> {
        self.rho.iter().zip(&self.rho_t).map(|(&v, &t)| Dual::new(v, t)).collect()
    }

    pub fn mom_dual(&self) -> Vec<Vec<Dual>> {
        let mt = &self.momentum().m_t;
        self.m
            .iter()
            .zip(mt)
            .map(|(c, t)| c.iter().zip(t).map(|(&v, &d)| Dual::new(v, d)).collect())
            .collect()
    }

    /// `∇φ(ρ)` carrying its time derivative: `φ′(ρ)∇ρ` differentiated
    /// along `ρ_t`.
    pub fn grad_phi_dual(&self) -> Result<Vec<Vec<Dual>>> {
        let grad_rho_t = spectral::spectral_grad(&self.grid, &self.rho_t)?;
        Ok((0..self.d)
            .map(|a| {
                (0..self.grid.len())
                    .map(|k| {
                        let r = self.rho[k];
                        let dphi = self.hpp[k] / r - self.hp[k] / (r * r);
                        let phi_p = Dual::new(self.phi_p[k], dphi * self.rho_t[k]);
                        phi_p * Dual::new(self.grad_rho[a][k], grad_rho_t[a][k])
                    })
                    .collect()
            })
            .collect())
    }

    pub fn grad_u_sq(&self, k: usize) -> f64 {
        self.du.iter().flatten().map(|c| c[k] * c[k]).sum()
    }

    /// `∂_i u_j ∂_j u_i`.
    pub fn grad_u_transpose(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.du[i][j][k] * self.du[j][i][k];
            }
        }
        s
    }

    pub fn u_sq(&self, k: usize) -> f64 {
        self.u.iter().map(|c| c[k] * c[k]).sum()
    }

    pub fn dot(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> f64 {
        a.iter().zip(b).map(|(x, y)| x[k] * y[k]).sum()
    }
}
