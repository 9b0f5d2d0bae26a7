//! Excess noise of the controlled conditional mean and the unconditional
//! covariance.
//!
//! Under feedback `u = −K X_c` the conditional mean is an Ornstein–Uhlenbeck
//! process driven by the innovations, so its covariance `Ξ` obeys
//!
//! ```text
//! dΞ/dt = (A − BK)Ξ + Ξ(A − BK)ᵀ + (ΣᶜCᵀ + M)W⁻¹(ΣᶜCᵀ + M)ᵀ.
//! ```
//!
//! The unconditional covariance is `Σᵘ = Σᶜ + Ξ`.

use alloc::vec::Vec;

use nalgebra::Matrix4;

use crate::linalg::symmetrize;
use crate::model::{CovMatrix, Model};
use crate::riccati::{PeriodicSolution, SolverOptions};
use crate::stability::{closed_loop_multipliers, max_modulus};
use crate::{Error, Result};

/// Periodic excess noise `Ξ(tᵢ)` on the solution grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessNoise {
    pub period: f64,
    pub n_steps: usize,
    pub samples: Vec<CovMatrix>,
    pub periods: usize,
    /// Largest closed-loop Floquet multiplier modulus.
    pub closed_loop_modulus: f64,
}

/// Innovation diffusion `(ΣCᵀ + M)W⁻¹(ΣCᵀ + M)ᵀ` at one grid point.
pub fn innovation_diffusion(model: &Model, sigma_c: &CovMatrix) -> Result<Matrix4<f64>> {
    let mm = &model.measurement;
    let l = sigma_c.as_matrix() * mm.c.transpose() + mm.m;
    Ok(symmetrize(&(l * model.w_inv()? * l.transpose())))
}

/// Solves the periodic Lyapunov equation for `Ξ` by integrating from `Ξ = 0`
/// until it repeats after a period.
///
/// The closed loop must be Floquet stable; otherwise `Ξ` has no periodic
/// attractor and [`Error::UnstableClosedLoop`] is returned.
pub fn excess_noise(model: &Model, sol: &PeriodicSolution, opts: &SolverOptions) -> Result<ExcessNoise> {
    let n = sol.n_steps;
    if sol.sigma_c.len() != n || sol.gain.len() != n || !n.is_multiple_of(2) {
        return Err(Error::GridMismatch("Σᶜ and K must share an even grid"));
    }
    let modulus = max_modulus(&closed_loop_multipliers(model, sol)?);
    if !(modulus < 1.0) {
        return Err(Error::UnstableClosedLoop { max_modulus: modulus });
    }

    let h = sol.step();
    let drift: Vec<Matrix4<f64>> = (0..n)
        .map(|i| model.drift(i as f64 * h) - model.b * sol.gain[i])
        .collect();
    let source: Vec<Matrix4<f64>> = sol
        .sigma_c
        .iter()
        .map(|s| innovation_diffusion(model, s))
        .collect::<Result<_>>()?;
    let rhs = |i: usize, x: &Matrix4<f64>| {
        let i = i % n;
        drift[i] * x + x * drift[i].transpose() + source[i]
    };

    // RK4 with step 2h so every stage lands on a grid point. The even and odd
    // grid points form two independent chains.
    let step = 2.0 * h;
    let mut state = [Matrix4::<f64>::zeros(); 2];
    let mut samples = alloc::vec![Matrix4::<f64>::zeros(); n];
    let mut residual = f64::INFINITY;
    for period in 0..opts.max_periods {
        let mut change: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (chain, x) in state.iter_mut().enumerate() {
            let start = *x;
            let mut i = chain;
            while i < n + chain {
                samples[i % n] = *x;
                let k1 = rhs(i, x);
                let k2 = rhs(i + 1, &(*x + k1 * (0.5 * step)));
                let k3 = rhs(i + 1, &(*x + k2 * (0.5 * step)));
                let k4 = rhs(i + 2, &(*x + k3 * step));
                *x = symmetrize(&(*x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0)));
                i += 2;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { what: "excess noise integration" });
            }
            change = change.max((*x - start).norm());
            scale = scale.max(x.norm());
        }
        for x in &state {
            let min_eig = x.symmetric_eigenvalues().min();
            if min_eig < -opts.psd_tol * scale.max(1.0) {
                return Err(Error::NotPositiveSemidefinite { what: "excess noise", min_eigenvalue: min_eig });
            }
        }
        residual = if scale > 0.0 { change / scale } else { change };
        if residual < opts.tolerance {
            return Ok(ExcessNoise {
                period: sol.period,
                n_steps: n,
                samples: samples.iter().map(CovMatrix::symmetrized).collect(),
                periods: period + 1,
                closed_loop_modulus: modulus,
            });
        }
    }
    Err(Error::NotConverged { what: "excess noise", periods: opts.max_periods, residual })
}

/// `Σᵘ(tᵢ) = Σᶜ(tᵢ) + Ξ(tᵢ)`.
pub fn unconditional_covariance(sigma_c: &[CovMatrix], xi: &[CovMatrix]) -> Result<Vec<CovMatrix>> {
    if sigma_c.len() != xi.len() {
        return Err(Error::GridMismatch("Σᶜ and Ξ lengths differ"));
    }
    Ok(sigma_c
        .iter()
        .zip(xi)
        .map(|(s, x)| CovMatrix::symmetrized(&(s.as_matrix() + x.as_matrix())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use crate::riccati::{lqr_gain, periodic_riccati_schur};

    fn solve(params: SystemParams, opts: &SolverOptions) -> (Model, PeriodicSolution) {
        let m = Model::new(params).unwrap();
        let sol = PeriodicSolution::new(periodic_riccati_schur(&m, opts).unwrap(), lqr_gain(&m, opts).unwrap())
            .unwrap();
        (m, sol)
    }

    #[test]
    fn no_measurement_means_no_excess_noise() {
        let opts = SolverOptions::default();
        // Without measurement the filter needs a stable open loop, and the
        // diffusion must balance the damping for the state to be physical.
        let p = SystemParams { eta: 0.0, gamma: 0.1, g1: 0.0, gamma_th: 0.1, ..Default::default() };
        let (m, sol) = solve(p, &opts);
        let xi = excess_noise(&m, &sol, &opts).unwrap();
        assert!(xi.samples.iter().all(|x| x.amax() == 0.0));
        assert_eq!(xi.periods, 1);
    }

    #[test]
    fn periodic_and_positive() {
        let opts = SolverOptions::default();
        let (m, sol) = solve(SystemParams::default(), &opts);
        let xi = excess_noise(&m, &sol, &opts).unwrap();
        for x in &xi.samples {
            assert!(x.min_eigenvalue() > -1e-10);
        }
        // Residual of the Lyapunov equation by central differences on the grid.
        let h = sol.step();
        let n = sol.n_steps;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let (prev, next) = (xi.samples[(i + n - 1) % n].as_matrix(), xi.samples[(i + 1) % n].as_matrix());
            let d = (next - prev) / (2.0 * h);
            let a = m.drift(i as f64 * h) - m.b * sol.gain[i];
            let x = xi.samples[i].as_matrix();
            let r = a * x + x * a.transpose() + innovation_diffusion(&m, &sol.sigma_c[i]).unwrap();
            worst = worst.max((d - r).amax());
        }
        let scale = xi.samples.iter().map(|x| x.amax()).fold(0.0, f64::max);
        assert!(worst < 1e-4 * scale, "worst {worst}, scale {scale}");
    }

    #[test]
    fn static_lyapunov_limit() {
        let opts = SolverOptions::default();
        let p = SystemParams { g1: 0.0, ..Default::default() };
        let (m, sol) = solve(p, &opts);
        let xi = excess_noise(&m, &sol, &opts).unwrap();
        let a = m.drift(0.0) - m.b * sol.gain[0];
        let x = xi.samples[0].as_matrix();
        let r = a * x + x * a.transpose() + innovation_diffusion(&m, &sol.sigma_c[0]).unwrap();
        assert!(r.amax() < 1e-7);
    }

    #[test]
    fn unconditional_dominates_conditional() {
        let opts = SolverOptions::default();
        let (m, sol) = solve(SystemParams::default(), &opts);
        let xi = excess_noise(&m, &sol, &opts).unwrap();
        let su = unconditional_covariance(&sol.sigma_c, &xi.samples).unwrap();
        for (u, c) in su.iter().zip(&sol.sigma_c) {
            let diff = CovMatrix::symmetrized(&(u.as_matrix() - c.as_matrix()));
            assert!(diff.min_eigenvalue() > -1e-10);
            assert!(u.is_physical(1e-9));
        }
        assert!(unconditional_covariance(&sol.sigma_c, &xi.samples[1..]).is_err());
    }
}
