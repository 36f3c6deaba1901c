//! Named initial data.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, State, VectorField};
use crate::num;

fn default_background() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    0.5
}
fn default_concentration() -> f64 {
    4.0
}
fn default_center() -> Vec<f64> {
    vec![0.5, 0.5]
}
fn default_radius() -> f64 {
    0.25
}
fn default_modes() -> u32 {
    3
}

/// Initial data presets, tagged by `"preset"` in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum InitialPreset {
    /// Uniform density and velocity.
    Constant {
        rho: f64,
        #[serde(default)]
        u: Vec<f64>,
    },
    /// Positive background plus a periodic von Mises bump, carried by a
    /// uniform flow with an optional swirl.
    SmoothBump {
        #[serde(default = "default_background")]
        background: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_concentration")]
        concentration: f64,
        #[serde(default = "default_center")]
        center: Vec<f64>,
        #[serde(default)]
        velocity: Vec<f64>,
        #[serde(default)]
        swirl: f64,
    },
    /// `A cos²(πr/2R)` inside radius `R`, exactly zero outside.
    VacuumBump {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_center")]
        center: Vec<f64>,
        #[serde(default)]
        velocity: Vec<f64>,
    },
    /// The shallow-water demonstration bump with a drifting swirl.
    SaintVenantDemo,
    /// Seeded random trigonometric density and velocity up to wavenumber
    /// `modes`, with the density kept above half its mean.
    RandomBandLimited {
        seed: u64,
        #[serde(default = "default_modes")]
        modes: u32,
        #[serde(default = "default_background")]
        mean: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

fn component(v: &[f64], a: usize) -> f64 {
    v.get(a).copied().unwrap_or(0.0)
}

fn periodic_offset(x: f64, c: f64, l: f64) -> f64 {
    let mut d = (x - c) % l;
    if d > 0.5 * l {
        d -= l;
    } else if d < -0.5 * l {
        d += l;
    }
    d
}

impl InitialPreset {
    /// Density and velocity fields on `grid`.
    pub fn primitives(&self, grid: &PeriodicGrid) -> Result<(ScalarField, VectorField)> {
        let d = grid.ndim();
        let l = grid.lengths().to_vec();
        match self {
            InitialPreset::Constant { rho, u } => {
                if !(*rho >= 0.0) {
                    return Err(Error::Argument(format!("constant density {rho} must be >= 0")));
                }
                Ok((vec![*rho; grid.len()], (0..d).map(|a| vec![component(u, a); grid.len()]).collect()))
            }
            InitialPreset::SmoothBump { background, amplitude, concentration, center, velocity, swirl } => {
                if !(*background > 0.0 && *amplitude >= 0.0) {
                    return Err(Error::Argument("smooth bump needs background > 0 and amplitude >= 0".into()));
                }
                let rho = grid.sample(|x| {
                    let mut e = 1.0;
                    for a in 0..d {
                        let arg = 2.0 * PI * (x[a] - component(center, a)) / l[a];
                        e *= num::exp(concentration * (num::cos(arg) - 1.0));
                    }
                    background + amplitude * e
                });
                let u = (0..d)
                    .map(|a| {
                        grid.sample(|x| {
                            let rot = if d == 1 {
                                num::sin(2.0 * PI * x[0] / l[0])
                            } else if a == 0 {
                                -num::sin(2.0 * PI * x[1] / l[1])
                            } else {
                                num::sin(2.0 * PI * x[0] / l[0])
                            };
                            component(velocity, a) + swirl * rot
                        })
                    })
                    .collect();
                Ok((rho, u))
            }
            InitialPreset::VacuumBump { amplitude, radius, center, velocity } => {
                let min_l = l.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(*amplitude > 0.0 && *radius > 0.0 && *radius < 0.5 * min_l) {
                    return Err(Error::Argument(
                        "vacuum bump needs amplitude > 0 and 0 < radius < half the domain".into(),
                    ));
                }
                let rho = grid.sample(|x| {
                    let r2: f64 = (0..d)
                        .map(|a| {
                            let o = periodic_offset(x[a], component(center, a), l[a]);
                            o * o
                        })
                        .sum();
                    let r = num::sqrt(r2);
                    if r < *radius {
                        let c = num::cos(0.5 * PI * r / radius);
                        amplitude * c * c
                    } else {
                        0.0
                    }
                });
                let u = (0..d).map(|a| vec![component(velocity, a); grid.len()]).collect();
                Ok((rho, u))
            }
            InitialPreset::SaintVenantDemo => InitialPreset::SmoothBump {
                background: 1.0,
                amplitude: 0.5,
                concentration: 4.0,
                center: vec![0.5, 0.5],
                velocity: vec![0.5, 0.25],
                swirl: 0.2,
            }
            .primitives(grid),
            InitialPreset::RandomBandLimited { seed, modes, mean, amplitude } => {
                if !(*mean > 0.0) || *modes == 0 {
                    return Err(Error::Argument("random preset needs mean > 0 and modes >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let field = |rng: &mut ChaCha8Rng| -> ScalarField {
                    let k = *modes as i32;
                    let mut terms = Vec::new();
                    let k1_range = if d == 2 { -k..=k } else { 0..=0 };
                    for k0 in 0..=k {
                        for k1 in k1_range.clone() {
                            if k0 == 0 && k1 <= 0 {
                                continue;
                            }
                            let amp: f64 = rng.random_range(-1.0..1.0);
                            let ph: f64 = rng.random_range(0.0..2.0 * PI);
                            terms.push((k0, k1, amp, ph));
                        }
                    }
                    grid.sample(|x| {
                        terms
                            .iter()
                            .map(|&(k0, k1, amp, ph)| {
                                let arg = 2.0 * PI * (k0 as f64 * x[0] / l[0]
                                    + if d == 2 { k1 as f64 * x[1] / l[1] } else { 0.0 })
                                    + ph;
                                amp * num::cos(arg)
                            })
                            .sum()
                    })
                };
                let raw = field(&mut rng);
                let peak = raw.iter().fold(0.0f64, |m, v| m.max(num::abs(*v)));
                let scale = if peak > 0.0 { (amplitude.min(0.5) * mean) / peak } else { 0.0 };
                let rho = raw.iter().map(|v| mean + scale * v).collect();
                let u = (0..d)
                    .map(|_| {
                        let f = field(&mut rng);
                        let p = f.iter().fold(0.0f64, |m, v| m.max(num::abs(*v)));
                        f.iter().map(|v| if p > 0.0 { amplitude * v / p } else { 0.0 }).collect()
                    })
                    .collect();
                Ok((rho, u))
            }
        }
    }

    pub fn build(&self, grid: &PeriodicGrid) -> Result<State> {
        let (rho, u) = self.primitives(grid)?;
        State::from_velocity(grid, rho, &u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_bump_has_true_zeros() {
        let g = PeriodicGrid::line(64).unwrap();
        let p = InitialPreset::VacuumBump { amplitude: 1.0, radius: 0.2, center: vec![0.5], velocity: vec![0.3] };
        let s = p.build(&g).unwrap();
        assert!(s.rho.iter().filter(|&&r| r == 0.0).count() > 30);
        assert!(s.rho.iter().all(|&r| r >= 0.0));
        for i in 0..64 {
            if s.rho[i] == 0.0 {
                assert_eq!(s.mom[0][i], 0.0);
            }
        }
    }

    #[test]
    fn random_preset_is_seeded_and_positive() {
        let g = PeriodicGrid::square(16).unwrap();
        let p = InitialPreset::RandomBandLimited { seed: 7, modes: 2, mean: 1.0, amplitude: 0.8 };
        let a = p.build(&g).unwrap();
        let b = p.build(&g).unwrap();
        assert_eq!(a, b);
        assert!(a.rho.iter().all(|&r| r >= 0.5 - 1e-12));
    }

    #[test]
    fn serde_tags() {
        let p: InitialPreset = serde_json::from_str(r#"{"preset": "saint_venant_demo"}"#).unwrap();
        assert_eq!(p, InitialPreset::SaintVenantDemo);
        let p: InitialPreset = serde_json::from_str(r#"{"preset": "smooth_bump", "amplitude": 0.2}"#).unwrap();
        assert!(matches!(p, InitialPreset::SmoothBump { amplitude, .. } if amplitude == 0.2));
        let p: InitialPreset = serde_json::from_str(r#"{"preset": "constant", "rho": 1.0, "u": [1.0]}"#).unwrap();
        let s = p.build(&PeriodicGrid::line(8).unwrap()).unwrap();
        assert!(s.mom[0].iter().all(|&m| m == 1.0));
    }
}
