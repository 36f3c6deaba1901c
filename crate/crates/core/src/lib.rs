//! Numerics for the isentropic compressible Navier-Stokes system with
//! density-dependent viscosity that degenerates on vacuum:
//!
//! ```text
//! ∂t ρ + div(ρu) = 0
//! ∂t(ρu) + div(ρu⊗u) + ∇ρ^γ − div(h(ρ)∇u) − ∇(g(ρ) div u) = 0
//! ```
//!
//! on periodic grids in one or two space dimensions. The crate is `no_std`
//! (it needs `alloc`); file formats, configuration and the command line live
//! in the companion `bdns` crate.
//!
//! Modules:
//!
//! * [`law`] viscosity pairs `(h, g)` tied by `g = ρh′ − h`, entropy weights
//!   and admissibility validation.
//! * [`grid`] periodic grids, field storage and centered discrete calculus;
//!   [`spectral`] the Fourier-collocation counterpart.
//! * [`solver`] explicit finite-volume time stepping.
//! * [`diagnostics`] energy, BD entropy, moment functional and a priori
//!   bound ledgers, plus the weak-form residual.
//! * [`verify`] spectral certification of the entropy identities on
//!   manufactured fields, independent of the solver.
//! * [`study`] mollified initial-data sequences and cross-run compactness
//!   metrics.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
mod error;
pub mod fft;
pub mod grid;
pub mod law;
pub mod mms;
mod num;
pub mod presets;
pub mod solver;
pub mod spectral;
pub mod study;
pub mod verify;

pub use diagnostics::{Diagnostics, EntropyLedger, LedgerRow, MomentParams, TestField};
pub use error::{Error, Result};
pub use grid::{DerivedFields, PeriodicGrid, ScalarField, State, VectorField};
pub use law::{AdmissibilityParams, ValidationReport, ViscosityLaw};
pub use presets::InitialPreset;
pub use solver::{Integrator, RunOutput, SolverConfig, Trajectory};
pub use num::observed_order;
pub use study::{InitialDataSpec, StabilityStudy};
