//! Periodic uniform grids, field storage and centered discrete calculus.
//!
//! Fields are flat `Vec<f64>` in row-major order: cell `(i0, i1)` sits at
//! `i0 * n1 + i1`, with `n1 = 1` in one dimension. Vector fields store one
//! such buffer per component.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num;

pub type ScalarField = Vec<f64>;
pub type VectorField = Vec<Vec<f64>>;

/// Smallest number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct PeriodicGrid {
    dim: u32,
    sizes: [usize; 2],
    lengths: [f64; 2],
}

#[derive(Clone, Serialize, Deserialize)]
struct RawGrid {
    dim: u32,
    cells: Vec<usize>,
    #[serde(default)]
    lengths: Option<Vec<f64>>,
}

impl TryFrom<RawGrid> for PeriodicGrid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        let lengths = r.lengths.unwrap_or_else(|| vec![1.0; r.cells.len()]);
        PeriodicGrid::new(r.dim, &r.cells, &lengths)
    }
}

impl From<PeriodicGrid> for RawGrid {
    fn from(g: PeriodicGrid) -> Self {
        let d = g.dim as usize;
        RawGrid {
            dim: g.dim,
            cells: g.sizes[..d].to_vec(),
            lengths: Some(g.lengths[..d].to_vec()),
        }
    }
}

impl PeriodicGrid {
    pub fn new(dim: u32, sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Argument(format!("grid dimension {dim} must be 1 or 2")));
        }
        let d = dim as usize;
        if sizes.len() != d || lengths.len() != d {
            return Err(Error::Argument(format!(
                "grid needs {d} sizes and lengths, got {} and {}",
                sizes.len(),
                lengths.len()
            )));
        }
        let mut s = [1usize; 2];
        let mut l = [1.0f64; 2];
        for a in 0..d {
            if sizes[a] < MIN_CELLS {
                return Err(Error::Argument(format!(
                    "axis {a} has {} cells, need at least {MIN_CELLS}",
                    sizes[a]
                )));
            }
            if !(lengths[a] > 0.0 && lengths[a].is_finite()) {
                return Err(Error::Argument(format!("axis {a} length {} must be > 0", lengths[a])));
            }
            s[a] = sizes[a];
            l[a] = lengths[a];
        }
        Ok(PeriodicGrid { dim, sizes: s, lengths: l })
    }

    /// Unit interval with `n` cells.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, &[n], &[1.0])
    }

    /// Unit square with `n × n` cells.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, &[n, n], &[1.0, 1.0])
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn ndim(&self) -> usize {
        self.dim as usize
    }

    /// Cells along each active axis.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim as usize]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim as usize]
    }

    pub fn len(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Cell-center coordinates; unused axes read 0.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let n1 = self.sizes[1];
        let (i0, i1) = (idx / n1, idx % n1);
        let mut x = [0.0; 2];
        x[0] = (i0 as f64 + 0.5) * self.spacing(0);
        if self.dim == 2 {
            x[1] = (i1 as f64 + 0.5) * self.spacing(1);
        }
        x
    }

    /// Samples `f` at every cell center.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> ScalarField {
        (0..self.len()).map(|i| f(self.center(i))).collect()
    }

    /// Index of the cell `offset` steps away along `axis`, wrapping around.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n1 = self.sizes[1];
        let (i0, i1) = (idx / n1, idx % n1);
        if axis == 0 {
            let n = self.sizes[0] as isize;
            let j = (i0 as isize + offset).rem_euclid(n) as usize;
            j * n1 + i1
        } else {
            let n = n1 as isize;
            let j = (i1 as isize + offset).rem_euclid(n) as usize;
            i0 * n1 + j
        }
    }

    pub fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: f.len() });
        }
        Ok(())
    }

    pub fn check_vector(&self, v: &[Vec<f64>]) -> Result<()> {
        if v.len() != self.ndim() {
            return Err(Error::Argument(format!(
                "vector field has {} components on a {}-d grid",
                v.len(),
                self.dim
            )));
        }
        v.iter().try_for_each(|c| self.check(c))
    }

    pub fn zeros(&self) -> ScalarField {
        vec![0.0; self.len()]
    }

    pub fn zero_vector(&self) -> VectorField {
        vec![self.zeros(); self.ndim()]
    }

    /// Centered difference `(f[i+1] − f[i−1]) / 2dx` along `axis`.
    pub fn partial(&self, f: &[f64], axis: usize) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.partial_unchecked(f, axis))
    }

    pub(crate) fn partial_unchecked(&self, f: &[f64], axis: usize) -> ScalarField {
        let inv = 0.5 / self.spacing(axis);
        (0..f.len())
            .map(|i| (f[self.shift(i, axis, 1)] - f[self.shift(i, axis, -1)]) * inv)
            .collect()
    }

    pub fn grad(&self, f: &[f64]) -> Result<VectorField> {
        self.check(f)?;
        Ok((0..self.ndim()).map(|a| self.partial_unchecked(f, a)).collect())
    }

    pub fn div(&self, v: &[Vec<f64>]) -> Result<ScalarField> {
        self.check_vector(v)?;
        let mut out = self.zeros();
        for (a, comp) in v.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(self.partial_unchecked(comp, a)) {
                *o += d;
            }
        }
        Ok(out)
    }

    /// Wide Laplacian `Σ (f[i+2] − 2f[i] + f[i−2]) / 4dx²`, equal to
    /// `div(grad f)` for the centered stencils above.
    pub fn lap(&self, f: &[f64]) -> Result<ScalarField> {
        self.check(f)?;
        let mut out = self.zeros();
        for a in 0..self.ndim() {
            let inv = 0.25 / (self.spacing(a) * self.spacing(a));
            for (i, o) in out.iter_mut().enumerate() {
                *o += (f[self.shift(i, a, 2)] - 2.0 * f[i] + f[self.shift(i, a, -2)]) * inv;
            }
        }
        Ok(out)
    }

    /// Midpoint quadrature.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.volume()
    }

    /// `L^p` norm with midpoint quadrature; `p = ∞` gives the max norm.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Argument(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(f.iter().fold(0.0, |m, x| m.max(num::abs(*x))));
        }
        if p == 1.0 {
            return Ok(self.integrate(&f.iter().map(|x| num::abs(*x)).collect::<Vec<_>>()));
        }
        if p == 2.0 {
            return Ok(num::sqrt(self.integrate(&f.iter().map(|x| x * x).collect::<Vec<_>>())));
        }
        let s: f64 = f.iter().map(|x| num::powf(num::abs(*x), p)).sum::<f64>() * self.cell_volume();
        Ok(num::powf(s, 1.0 / p))
    }

    /// Pointwise Euclidean norm of a vector field.
    pub fn magnitude(&self, v: &[Vec<f64>]) -> ScalarField {
        (0..self.len())
            .map(|i| num::sqrt(v.iter().map(|c| c[i] * c[i]).sum()))
            .collect()
    }
}

/// Density and momentum at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub mom: VectorField,
}

impl State {
    pub fn new(grid: &PeriodicGrid, t: f64, rho: ScalarField, mom: VectorField) -> Result<Self> {
        grid.check(&rho)?;
        grid.check_vector(&mom)?;
        Ok(State { t, rho, mom })
    }

    /// Builds a state from density and velocity.
    pub fn from_velocity(grid: &PeriodicGrid, rho: ScalarField, u: &[Vec<f64>]) -> Result<Self> {
        grid.check(&rho)?;
        grid.check_vector(u)?;
        let mom = u
            .iter()
            .map(|c| c.iter().zip(&rho).map(|(v, r)| v * r).collect())
            .collect();
        Ok(State { t: 0.0, rho, mom })
    }

    pub fn mass(&self, grid: &PeriodicGrid) -> f64 {
        grid.integrate(&self.rho)
    }

    pub fn total_momentum(&self, grid: &PeriodicGrid) -> Vec<f64> {
        self.mom.iter().map(|c| grid.integrate(c)).collect()
    }

    pub fn max_density(&self) -> f64 {
        self.rho.iter().cloned().fold(0.0, f64::max)
    }

    /// Index and field name of the first NaN or infinite entry.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        if let Some(i) = self.rho.iter().position(|x| !x.is_finite()) {
            return Some(("rho", i));
        }
        for c in &self.mom {
            if let Some(i) = c.iter().position(|x| !x.is_finite()) {
                return Some(("mom", i));
            }
        }
        None
    }
}

/// Default vacuum threshold `1e-10 · max ρ₀`.
pub fn default_eps_vac(rho0: &[f64]) -> f64 {
    let m = rho0.iter().cloned().fold(0.0, f64::max);
    1e-10 * if m > 0.0 { m } else { 1.0 }
}

/// Vacuum-safe quantities derived from a state.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedFields {
    /// `m/ρ` where `ρ > ε_vac`, else 0.
    pub u: VectorField,
    pub sqrt_rho: ScalarField,
    /// `m/√ρ` where `ρ > ε_vac`, else 0.
    pub sqrt_rho_u: VectorField,
    /// Cells with `ρ ≤ ε_vac` whose momentum was discarded.
    pub cutoff_cells: usize,
}

pub fn derived(state: &State, eps_vac: f64) -> DerivedFields {
    let n = state.rho.len();
    let d = state.mom.len();
    let mut u = vec![vec![0.0; n]; d];
    let mut sru = vec![vec![0.0; n]; d];
    let mut sqrt_rho = vec![0.0; n];
    let mut cutoff = 0;
    for i in 0..n {
        let r = state.rho[i];
        let s = if r > 0.0 { num::sqrt(r) } else { 0.0 };
        sqrt_rho[i] = s;
        if r > eps_vac {
            for a in 0..d {
                let m = state.mom[a][i];
                u[a][i] = m / r;
                sru[a][i] = m / s;
            }
        } else if state.mom.iter().any(|c| c[i] != 0.0) {
            cutoff += 1;
        }
    }
    DerivedFields { u, sqrt_rho, sqrt_rho_u: sru, cutoff_cells: cutoff }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn construction_errors() {
        assert!(PeriodicGrid::new(3, &[8, 8, 8], &[1.0; 3]).is_err());
        assert!(PeriodicGrid::line(4).is_err());
        assert!(PeriodicGrid::new(2, &[8], &[1.0]).is_err());
        assert!(PeriodicGrid::new(1, &[16], &[0.0]).is_err());
        let g = PeriodicGrid::new(2, &[16, 8], &[2.0, 1.0]).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.cell_volume(), 0.125 * 0.125);
    }

    #[test]
    fn shift_wraps() {
        let g = PeriodicGrid::new(2, &[8, 16], &[1.0, 1.0]).unwrap();
        assert_eq!(g.shift(0, 0, -1), 7 * 16);
        assert_eq!(g.shift(15, 1, 1), 0);
        assert_eq!(g.shift(3 * 16 + 2, 0, 2), 5 * 16 + 2);
    }

    #[test]
    fn grad_of_sine_is_second_order() {
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let g = PeriodicGrid::line(n).unwrap();
            let f = g.sample(|x| (2.0 * PI * x[0]).sin());
            let exact = g.sample(|x| 2.0 * PI * (2.0 * PI * x[0]).cos());
            errs.push(max_err(&g.grad(&f).unwrap()[0], &exact));
        }
        let order = crate::num::observed_order(&[64, 128, 256], &errs);
        assert!(order >= 1.9, "order {order}");
        let g = PeriodicGrid::line(256).unwrap();
        assert!(errs[2] <= 4.0 * PI.powi(3) * g.spacing(0).powi(2));
    }

    #[test]
    fn constant_gradient_is_zero() {
        let g = PeriodicGrid::square(16).unwrap();
        let gr = g.grad(&vec![3.5; g.len()]).unwrap();
        assert!(gr.iter().all(|c| c.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn shape_mismatch() {
        let g = PeriodicGrid::line(16).unwrap();
        assert!(matches!(g.grad(&[0.0; 8]), Err(Error::ShapeMismatch { .. })));
        assert!(g.div(&[vec![0.0; 16], vec![0.0; 16]]).is_err());
    }

    #[test]
    fn norms() {
        let g = PeriodicGrid::line(64).unwrap();
        assert!((g.integrate(&vec![1.0; 64]) - 1.0).abs() < 1e-15);
        let s = g.sample(|x| (2.0 * PI * x[0]).sin());
        let l2 = g.lp_norm(&s, 2.0).unwrap();
        assert!((l2 * l2 - 0.5).abs() < 1e-12);
        assert!(g.lp_norm(&s, 0.5).is_err());
        assert!((g.lp_norm(&s, f64::INFINITY).unwrap() - 1.0).abs() < 1e-2);
        let l3 = g.lp_norm(&s, 3.0).unwrap();
        let scaled: Vec<f64> = s.iter().map(|x| -2.5 * x).collect();
        assert!((g.lp_norm(&scaled, 3.0).unwrap() - 2.5 * l3).abs() < 1e-13);
    }

    #[test]
    fn derived_examples() {
        let g = PeriodicGrid::line(8).unwrap();
        let s = State::new(&g, 0.0, vec![1.0; 8], vec![vec![2.0; 8]]).unwrap();
        let d = derived(&s, 1e-10);
        assert!(d.u[0].iter().all(|&x| x == 2.0));
        assert_eq!(d.cutoff_cells, 0);

        let mut rho = vec![1.0; 8];
        rho[3] = 0.0;
        rho[5] = 1e-20;
        let mut m = vec![0.5; 8];
        m[3] = 0.0;
        m[5] = 1e-15;
        let d = derived(&State::new(&g, 0.0, rho, vec![m]).unwrap(), 1e-10);
        assert_eq!(d.u[0][3], 0.0);
        assert_eq!(d.sqrt_rho_u[0][3], 0.0);
        assert_eq!(d.u[0][5], 0.0);
        assert_eq!(d.cutoff_cells, 1);
    }

    fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn div_grad_is_lap(f in field(16 * 8)) {
            let g = PeriodicGrid::new(2, &[16, 8], &[1.0, 0.7]).unwrap();
            let dg = g.div(&g.grad(&f).unwrap()).unwrap();
            let l = g.lap(&f).unwrap();
            let scale = l.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            prop_assert!(max_err(&dg, &l) <= 1e-12 * scale);
        }

        #[test]
        fn summation_by_parts(f in field(32), v in field(32)) {
            let g = PeriodicGrid::line(32).unwrap();
            let div = g.div(&[v.clone()]).unwrap();
            let lhs: f64 = g.integrate(&f.iter().zip(&div).map(|(a, b)| a * b).collect::<Vec<_>>());
            let gf = g.grad(&f).unwrap();
            let rhs: f64 = -g.integrate(&gf[0].iter().zip(&v).map(|(a, b)| a * b).collect::<Vec<_>>());
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn derivative_means_vanish(f in field(64)) {
            let g = PeriodicGrid::square(8).unwrap();
            let gr = g.grad(&f).unwrap();
            for c in &gr {
                prop_assert!(g.integrate(c).abs() <= 1e-11);
            }
            prop_assert!(g.integrate(&g.div(&gr).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn derived_is_scale_consistent(rho in prop::collection::vec(0.0f64..3.0, 16), m in field(16), c in -5.0f64..5.0) {
            let g = PeriodicGrid::line(16).unwrap();
            let s = State::new(&g, 0.0, rho.clone(), vec![m.clone()]).unwrap();
            let d = derived(&s, 1e-3);
            let s2 = State::new(&g, 0.0, rho.clone(), vec![m.iter().map(|x| c * x).collect()]).unwrap();
            let d2 = derived(&s2, 1e-3);
            for i in 0..16 {
                prop_assert!((d2.u[0][i] - c * d.u[0][i]).abs() <= 1e-9 * d.u[0][i].abs().max(1.0) * c.abs().max(1.0));
                prop_assert!((d2.sqrt_rho_u[0][i] - c * d.sqrt_rho_u[0][i]).abs() <= 1e-9 * d.sqrt_rho_u[0][i].abs().max(1.0) * c.abs().max(1.0));
                if rho[i] > 1e-3 {
                    let direct = m[i] * m[i] / rho[i];
                    prop_assert!((d.sqrt_rho_u[0][i].powi(2) - direct).abs() <= 1e-12 * direct.max(1.0));
                } else {
                    prop_assert_eq!(d.u[0][i], 0.0);
                }
            }
        }
    }
}
