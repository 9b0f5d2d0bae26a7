//! Stability of the open-loop drift and of the feedback closed loop.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, Matrix4};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;

use crate::linalg;
use crate::model::{Model, SystemParams, OMEGA0};
use crate::riccati::PeriodicSolution;
use crate::{Error, Result};

/// Real parts above this count as growing.
const AXIS_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are treated as one repeated eigenvalue.
const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftStability {
    /// All solutions stay bounded.
    Stable,
    /// Some eigenvalue has positive real part, or an imaginary-axis
    /// eigenvalue is defective (secular growth).
    Unstable,
}

/// Stability of the static drift `A` at `g = g₀`.
///
/// The static drift separates into the centre-of-mass mode with stiffness
/// `Ω₀²` and the relative mode with stiffness `Ω₀² + 4Ω₀g₀`, both with
/// damping `γ`. A mode without positive stiffness is not confined: at
/// `g₀ = −Ω₀/4` the relative mode is a free particle (a Jordan block for
/// `γ = 0`) and beyond it grows exponentially.
pub fn static_stability(params: &SystemParams) -> DriftStability {
    let relative = OMEGA0 * OMEGA0 + 4.0 * OMEGA0 * params.g0;
    if relative > 0.0 && params.gamma >= 0.0 {
        DriftStability::Stable
    } else {
        DriftStability::Unstable
    }
}

/// Eigenvalues of a 4×4 matrix.
pub fn eigenvalues(a: &Matrix4<f64>) -> Result<Vec<Complex<f64>>> {
    let ev = linalg::eigenvalues(DMatrix::from_iterator(4, 4, a.iter().copied()))?;
    Ok(ev.into_iter().map(|(re, im)| Complex::new(re, im)).collect())
}

/// Generic eigenvalue test: unstable if some eigenvalue has positive real
/// part or an imaginary-axis eigenvalue is defective (secular growth).
pub fn matrix_stability(a: &Matrix4<f64>) -> Result<DriftStability> {
    let eig = eigenvalues(a)?;
    if eig.iter().any(|z| z.re > AXIS_TOL) {
        return Ok(DriftStability::Unstable);
    }
    let ac = a.map(|x| Complex::new(x, 0.0));
    for (i, zi) in eig.iter().enumerate() {
        if zi.re < -AXIS_TOL {
            continue;
        }
        let algebraic = eig.iter().filter(|zj| modulus(*zj - zi) < CLUSTER_TOL).count();
        if algebraic < 2 || eig.iter().take(i).any(|zj| modulus(zj - zi) < CLUSTER_TOL) {
            continue;
        }
        let shifted = ac - Matrix4::from_diagonal_element(*zi);
        let sv = shifted.singular_values();
        let scale = sv.max().max(1.0);
        let nullity = sv.iter().filter(|s| **s < 1e-6 * scale).count();
        if nullity < algebraic {
            return Ok(DriftStability::Unstable);
        }
    }
    Ok(DriftStability::Stable)
}

fn modulus(z: Complex<f64>) -> f64 {
    z.re.hypot(z.im)
}

fn rk4_fundamental(a_at: impl Fn(usize) -> Matrix4<f64>, n_steps: usize, h: f64) -> Matrix4<f64> {
    // Samples of the generator are taken on the solver grid; each RK4 step
    // spans two grid intervals so its midpoint is a grid point.
    let mut phi = Matrix4::identity();
    let step = 2.0 * h;
    let mut i = 0;
    while i < n_steps {
        let (a0, a1, a2) = (a_at(i), a_at(i + 1), a_at((i + 2) % n_steps));
        let k1 = a0 * phi;
        let k2 = a1 * (phi + k1 * (0.5 * step));
        let k3 = a1 * (phi + k2 * (0.5 * step));
        let k4 = a2 * (phi + k3 * step);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        i += 2;
    }
    phi
}

/// Floquet multipliers of `ẋ = A(t)x` over one modulation period.
pub fn open_loop_multipliers(model: &Model, n_steps: usize) -> Result<Vec<Complex<f64>>> {
    let period = model.period()?;
    if n_steps < 2 || !n_steps.is_multiple_of(2) {
        return Err(Error::InvalidParameter { name: "n_steps", reason: "must be even" });
    }
    let h = period / n_steps as f64;
    let phi = rk4_fundamental(|i| model.drift(i as f64 * h), n_steps, h);
    eigenvalues(&phi)
}

/// Floquet multipliers of the closed loop `ẋ = (A(t) − B K(t))x` with the
/// gain sampled on the solution grid.
pub fn closed_loop_multipliers(model: &Model, sol: &PeriodicSolution) -> Result<Vec<Complex<f64>>> {
    let n = sol.n_steps;
    if !n.is_multiple_of(2) || sol.gain.len() != n {
        return Err(Error::GridMismatch("gain must be sampled on an even grid"));
    }
    let h = sol.step();
    let phi = rk4_fundamental(|i| model.drift(i as f64 * h) - model.b * sol.gain[i], n, h);
    if !phi.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged { what: "closed-loop monodromy" });
    }
    eigenvalues(&phi)
}

pub fn max_modulus(multipliers: &[Complex<f64>]) -> f64 {
    multipliers.iter().map(|z| modulus(*z)).fold(0.0, f64::max)
}
