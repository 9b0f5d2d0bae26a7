//! Entanglement generation between two continuously measured, feedback
//! controlled harmonic oscillators whose coupling is parametrically modulated.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerics:
//!
//! * [`model`]: system parameters and every time-dependent matrix of the
//!   linear dynamics (drift, control, measurement, noise, cost).
//! * [`riccati`]: periodic filter Riccati solutions by an ordered-Schur
//!   subspace method and by direct integration, and the periodic LQR gain.
//! * [`noise`]: the excess-noise Lyapunov equation and the unconditional state.
//! * [`entanglement`]: symplectic spectra and logarithmic negativity.
//! * [`trajectories`]: Euler–Maruyama Monte Carlo of the conditional mean.
//! * [`stability`]: eigenvalue and Floquet stability of the drift.
//! * [`pipeline`]: glue that runs the full chain for one parameter point.
//!
//! All rates are expressed in units of the trap frequency `Ω₀`, and time in
//! units of `1/Ω₀`. The vacuum covariance is `I/2`.
#![no_std]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;

pub mod entanglement;
pub mod model;
pub mod noise;
pub mod pipeline;
pub mod riccati;
pub mod stability;
pub mod trajectories;

pub use error::{Error, Result};
pub use linalg::{symplectic_form, symplectic_form_2n};
pub use model::{CovMatrix, CouplingGeometry, Model, PhaseSpaceVector, SystemParams};
