//! Small in-place complex FFT: iterative radix-2 for power-of-two lengths,
//! a direct DFT otherwise.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::num;

/// Forward transform, `X_k = Σ x_j e^{−2πi jk/n}`.
pub fn forward(data: &mut [Complex64]) {
    transform(data, -1.0);
}

/// Inverse transform including the `1/n` factor.
pub fn inverse(data: &mut [Complex64]) {
    transform(data, 1.0);
    let s = 1.0 / data.len() as f64;
    for x in data.iter_mut() {
        *x *= s;
    }
}

fn transform(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(data, sign);
    } else {
        direct(data, sign);
    }
}

fn radix2(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles computed directly rather than by recurrence to keep
        // round-off at the level of a single sin/cos evaluation.
        let tw: Vec<Complex64> = (0..half)
            .map(|k| Complex64::new(num::cos(ang * k as f64), num::sin(ang * k as f64)))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * tw[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn direct(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    let out: Vec<Complex64> = (0..n)
        .map(|k| {
            (0..n).fold(Complex64::new(0.0, 0.0), |acc, j| {
                let ang = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                acc + data[j] * Complex64::new(num::cos(ang), num::sin(ang))
            })
        })
        .collect();
    data.copy_from_slice(&out);
}

/// Transforms a row-major `n0 × n1` array along both axes.
pub fn forward_2d(data: &mut [Complex64], n0: usize, n1: usize) {
    along_axes(data, n0, n1, forward);
}

pub fn inverse_2d(data: &mut [Complex64], n0: usize, n1: usize) {
    along_axes(data, n0, n1, inverse);
}

fn along_axes(data: &mut [Complex64], n0: usize, n1: usize, f: fn(&mut [Complex64])) {
    if n1 > 1 {
        for row in data.chunks_mut(n1) {
            f(row);
        }
    }
    if n0 > 1 {
        let mut col = alloc::vec![Complex64::new(0.0, 0.0); n0];
        for j in 0..n1 {
            for i in 0..n0 {
                col[i] = data[i * n1 + j];
            }
            f(&mut col);
            for i in 0..n0 {
                data[i * n1 + j] = col[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                (0..n).map(|j| {
                    let a = -2.0 * PI * (j * k) as f64 / n as f64;
                    x[j] * Complex64::new(a.cos(), a.sin())
                }).sum()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matches_naive_dft(re in prop::collection::vec(-1.0f64..1.0, 1..=6), pow in 0u32..7) {
            let n = 1usize << pow;
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(re[i % re.len()], (i as f64).sin())).collect();
            let mut y = x.clone();
            forward(&mut y);
            let z = naive(&x);
            for (a, b) in y.iter().zip(&z) {
                prop_assert!((a - b).norm_sqr().sqrt() <= 1e-11 * n as f64);
            }
            inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - b).norm_sqr().sqrt() <= 1e-13 * n as f64);
            }
        }

        #[test]
        fn non_power_of_two_roundtrip(n in 2usize..20) {
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.7).cos(), 0.0)).collect();
            let mut y = x.clone();
            forward(&mut y);
            let z = naive(&x);
            for (a, b) in y.iter().zip(&z) {
                prop_assert!((a - b).norm_sqr().sqrt() <= 1e-11);
            }
            inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - b).norm_sqr().sqrt() <= 1e-12);
            }
        }
    }
}
