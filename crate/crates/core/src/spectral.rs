//! Fourier-collocation derivatives and Gaussian mollification on a
//! periodic grid. Accurate to round-off on band-limited fields.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::fft;
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::num;

/// Signed wavenumber of FFT bin `j` along `axis`, and whether it is the
/// Nyquist bin.
fn wavenumber(grid: &PeriodicGrid, axis: usize, j: usize) -> (f64, bool) {
    let n = grid.sizes()[axis];
    let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
    (2.0 * PI * m as f64 / grid.lengths()[axis], n % 2 == 0 && j == n / 2)
}

fn spectrum(grid: &PeriodicGrid, f: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let s = grid_shape(grid);
    fft::forward_2d(&mut c, s.0, s.1);
    c
}

fn real_field(grid: &PeriodicGrid, mut c: Vec<Complex64>) -> ScalarField {
    let s = grid_shape(grid);
    fft::inverse_2d(&mut c, s.0, s.1);
    c.into_iter().map(|z| z.re).collect()
}

fn grid_shape(grid: &PeriodicGrid) -> (usize, usize) {
    let s = grid.sizes();
    (s[0], if s.len() > 1 { s[1] } else { 1 })
}

/// Applies a per-mode multiplier `m(k0, k1, nyquist0, nyquist1)`.
fn apply<F>(grid: &PeriodicGrid, f: &[f64], mult: F) -> Result<ScalarField>
where
    F: Fn(f64, f64, bool, bool) -> Complex64,
{
    grid.check(f)?;
    let mut c = spectrum(grid, f);
    let (n0, n1) = grid_shape(grid);
    for i in 0..n0 {
        let (k0, q0) = wavenumber(grid, 0, i);
        for j in 0..n1 {
            let (k1, q1) = if grid.ndim() > 1 { wavenumber(grid, 1, j) } else { (0.0, false) };
            c[i * n1 + j] *= mult(k0, k1, q0, q1);
        }
    }
    Ok(real_field(grid, c))
}

/// Derivative of `f` of the given `order` along `axis`. Odd orders drop
/// the Nyquist mode, which has no real-valued derivative.
pub fn derivative(grid: &PeriodicGrid, f: &[f64], axis: usize, order: u32) -> Result<ScalarField> {
    let i = Complex64::new(0.0, 1.0);
    apply(grid, f, |k0, k1, q0, q1| {
        let (k, q) = if axis == 0 { (k0, q0) } else { (k1, q1) };
        if order % 2 == 1 && q {
            Complex64::new(0.0, 0.0)
        } else {
            (i * k).powu(order)
        }
    })
}

/// `∂_a ∂_b f`.
pub fn mixed(grid: &PeriodicGrid, f: &[f64], a: usize, b: usize) -> Result<ScalarField> {
    if a == b {
        return derivative(grid, f, a, 2);
    }
    apply(grid, f, |k0, k1, q0, q1| {
        if q0 || q1 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-k0 * k1, 0.0)
        }
    })
}

pub fn spectral_grad(grid: &PeriodicGrid, f: &[f64]) -> Result<VectorField> {
    (0..grid.ndim()).map(|a| derivative(grid, f, a, 1)).collect()
}

pub fn spectral_div(grid: &PeriodicGrid, v: &[Vec<f64>]) -> Result<ScalarField> {
    grid.check_vector(v)?;
    let mut out = grid.zeros();
    for (a, c) in v.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(derivative(grid, c, a, 1)?) {
            *o += d;
        }
    }
    Ok(out)
}

pub fn spectral_lap(grid: &PeriodicGrid, f: &[f64]) -> Result<ScalarField> {
    apply(grid, f, |k0, k1, _, _| Complex64::new(-(k0 * k0 + k1 * k1), 0.0))
}

/// Periodic Gaussian convolution of width `sigma`, via the multiplier
/// `exp(−|k|²σ²/2)`. `sigma = 0` returns `f` unchanged.
pub fn mollify(grid: &PeriodicGrid, f: &[f64], sigma: f64) -> Result<ScalarField> {
    if sigma == 0.0 {
        grid.check(f)?;
        return Ok(f.to_vec());
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(crate::Error::Argument(alloc::format!("mollifier width {sigma} must be >= 0")));
    }
    apply(grid, f, |k0, k1, _, _| {
        Complex64::new(num::exp(-0.5 * (k0 * k0 + k1 * k1) * sigma * sigma), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn sine_derivative() {
        let g = PeriodicGrid::line(64).unwrap();
        let f = g.sample(|x| (2.0 * PI * x[0]).sin());
        let exact = g.sample(|x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        assert!(max_err(&spectral_grad(&g, &f).unwrap()[0], &exact) < 1e-12);
        let c = vec![4.0; 64];
        assert!(spectral_grad(&g, &c).unwrap()[0].iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn band_limited_2d_derivatives() {
        let g = PeriodicGrid::new(2, &[64, 32], &[1.0, 2.0]).unwrap();
        let f = g.sample(|x| (2.0 * PI * x[0]).sin() * (PI * x[1]).cos() + (4.0 * PI * x[0] + 3.0 * PI * x[1]).cos());
        let fx = g.sample(|x| 2.0 * PI * (2.0 * PI * x[0]).cos() * (PI * x[1]).cos() - 4.0 * PI * (4.0 * PI * x[0] + 3.0 * PI * x[1]).sin());
        let fxy = g.sample(|x| -2.0 * PI * PI * (2.0 * PI * x[0]).cos() * (PI * x[1]).sin() - 12.0 * PI * PI * (4.0 * PI * x[0] + 3.0 * PI * x[1]).cos());
        assert!(max_err(&derivative(&g, &f, 0, 1).unwrap(), &fx) < 1e-10);
        assert!(max_err(&mixed(&g, &f, 0, 1).unwrap(), &fxy) < 1e-9);
        let dg = spectral_div(&g, &spectral_grad(&g, &f).unwrap()).unwrap();
        assert!(max_err(&dg, &spectral_lap(&g, &f).unwrap()) < 1e-9);
    }

    #[test]
    fn mollify_constant_and_mode() {
        let g = PeriodicGrid::line(32).unwrap();
        let c = vec![2.0; 32];
        assert!(max_err(&mollify(&g, &c, 0.1).unwrap(), &c) < 1e-14);
        let f = g.sample(|x| (2.0 * PI * x[0]).cos());
        let s = 0.05;
        let damp = (-0.5 * (2.0 * PI * s).powi(2)).exp();
        let exact: Vec<f64> = f.iter().map(|v| v * damp).collect();
        assert!(max_err(&mollify(&g, &f, s).unwrap(), &exact) < 1e-14);
        assert!(mollify(&g, &f, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn mollify_preserves_mean(f in prop::collection::vec(0.0f64..5.0, 32), s in 0.0f64..0.3) {
            let g = PeriodicGrid::line(32).unwrap();
            let m = mollify(&g, &f, s).unwrap();
            prop_assert!((g.integrate(&m) - g.integrate(&f)).abs() < 1e-12);
        }
    }
}
