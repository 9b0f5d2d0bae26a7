//! Symplectic spectra, logarithmic negativity and period averages.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Vector4};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::symplectic_form;
use crate::model::CovMatrix;
use crate::{Error, Result};

/// Symplectic eigenvalues `(ν₁, ν₂)`, `ν₁ ≤ ν₂`, of a positive definite
/// covariance matrix.
///
/// The `±ν` pairs of `iJσ` are obtained from the real antisymmetric matrix
/// `M = σ^{1/2} J σ^{1/2}`, which is similar to `Jσ`; the eigenvalues of the
/// symmetric matrix `MᵀM` are `ν₁², ν₁², ν₂², ν₂²`.
pub fn symplectic_eigenvalues(sigma: &CovMatrix) -> Result<(f64, f64)> {
    let m = sigma.as_matrix();
    if m.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = m.symmetric_eigen();
    let sqrt_diag = eig.eigenvalues.map(|x| x.sqrt());
    let root = eig.eigenvectors * Matrix4::from_diagonal(&sqrt_diag) * eig.eigenvectors.transpose();
    let k = root * symplectic_form() * root;
    let mut sq: Vec<f64> = (k.transpose() * k).symmetric_eigenvalues().iter().copied().collect();
    sq.sort_by(|a, b| a.total_cmp(b));
    let nu1 = (0.5 * (sq[0] + sq[1])).max(0.0).sqrt();
    let nu2 = (0.5 * (sq[2] + sq[3])).max(0.0).sqrt();
    Ok((nu1, nu2))
}

/// Partial transposition of the second mode: `σ ↦ ΛσΛ`, `Λ = diag(1,1,1,−1)`.
pub fn partial_transpose(sigma: &CovMatrix) -> CovMatrix {
    let lam = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
    CovMatrix::symmetrized(&(lam * sigma.as_matrix() * lam))
}

/// Signed `E_N = −ln(2ν̃)` with `ν̃` the smallest symplectic eigenvalue of
/// the partially transposed covariance. Positive values detect entanglement;
/// `max(0, E_N)` is the logarithmic negativity proper.
pub fn log_negativity(sigma: &CovMatrix) -> Result<f64> {
    let (nu, _) = symplectic_eigenvalues(&partial_transpose(sigma))?;
    Ok(-(2.0 * nu).ln())
}

/// How a period average treats negative `E_N` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageMode {
    /// Average the signed values.
    #[default]
    Signed,
    /// Average `max(0, E_N)`.
    Clamped,
}

/// Trapezoidal average over one period of uniformly spaced periodic samples
/// (`samples[0]` at `t = 0`; the value at `t = T` is `samples[0]` again).
pub fn period_average(samples: &[f64], mode: AverageMode) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let value = |x: f64| match mode {
        AverageMode::Signed => x,
        AverageMode::Clamped => x.max(0.0),
    };
    let n = samples.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = value(samples[i]);
        let b = value(samples[(i + 1) % n]);
        acc += 0.5 * (a + b);
    }
    acc / n as f64
}

/// Conditional and unconditional `E_N` over one modulation period.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativityTrace {
    pub times: Vec<f64>,
    pub e_n_c: Vec<f64>,
    pub e_n_u: Vec<f64>,
    pub mean_c: f64,
    pub mean_u: f64,
    /// Stroboscopic maximum of `e_n_u`.
    pub max_u: f64,
}

impl NegativityTrace {
    pub fn new(times: Vec<f64>, e_n_c: Vec<f64>, e_n_u: Vec<f64>, mode: AverageMode) -> Result<Self> {
        if times.len() != e_n_c.len() || times.len() != e_n_u.len() || times.is_empty() {
            return Err(Error::GridMismatch("trace columns must have equal, non-zero length"));
        }
        let mean_c = period_average(&e_n_c, mode);
        let mean_u = period_average(&e_n_u, mode);
        let max_u = e_n_u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { times, e_n_c, e_n_u, mean_c, mean_u, max_u })
    }

    pub fn from_covariances(
        times: Vec<f64>,
        sigma_c: &[CovMatrix],
        sigma_u: &[CovMatrix],
        mode: AverageMode,
    ) -> Result<Self> {
        let e_c = sigma_c.iter().map(log_negativity).collect::<Result<Vec<_>>>()?;
        let e_u = sigma_u.iter().map(log_negativity).collect::<Result<Vec<_>>>()?;
        Self::new(times, e_c, e_u, mode)
    }
}

/// Main parametric resonance `2Ω* = 2√(Ω₀² + 4Ω₀g₀)` of the relative mode.
pub fn resonance_frequency(g0: f64, omega0: f64) -> Result<f64> {
    let radicand = omega0 * omega0 + 4.0 * omega0 * g0;
    if !(radicand > 0.0) {
        return Err(Error::Domain("relative mode is not oscillatory (Ω₀² + 4Ω₀g₀ <= 0)"));
    }
    Ok(2.0 * radicand.sqrt())
}
