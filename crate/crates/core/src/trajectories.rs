//! Euler–Maruyama simulation of the controlled conditional mean
//!
//! ```text
//! dX = (A(t) − B K(t)) X dt + (Σᶜ(t)Cᵀ + M) W⁻¹ dY_innov,   dY_innov ~ N(0, W dt),
//! ```
//!
//! and ensemble statistics used to check it against the excess noise `Ξ`.
//!
//! Trajectory `i` of a run with master seed `s` draws from a ChaCha20 stream
//! keyed by `s` with stream number `i`, so results do not depend on how
//! trajectories are scheduled across threads.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{CovMatrix, Model, PhaseSpaceVector};
use crate::riccati::PeriodicSolution;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Gaussian,
    /// Drop the stochastic term; useful for checking the deterministic drift.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub n_periods: usize,
    /// Euler–Maruyama step; must divide the solution grid step.
    pub dt: f64,
    pub initial: PhaseSpaceVector,
    pub noise: NoiseMode,
}

/// One sampled trajectory. `samples[k]` is the state at `t = k·h` with `h`
/// the solution grid step, for `k = 0..=n_periods·n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub index: u64,
    pub dt: f64,
    pub grid_step: f64,
    pub n_steps: usize,
    pub samples: Vec<PhaseSpaceVector>,
}

impl Trajectory {
    /// Stroboscopic samples at `t = kT`.
    pub fn strobe(&self) -> impl Iterator<Item = &PhaseSpaceVector> + '_ {
        self.samples.iter().step_by(self.n_steps)
    }

    /// Sample at `t = period·T + phase·h`.
    pub fn at(&self, period: usize, phase: usize) -> Option<&PhaseSpaceVector> {
        self.samples.get(period * self.n_steps + phase)
    }
}

/// RNG for trajectory `index` under master seed `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Number of Euler–Maruyama steps per grid interval `h`, if `dt` divides it.
fn substeps(h: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter { name: "dt", reason: "must be positive and finite" });
    }
    let ratio = h / dt;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch("dt must divide the solution grid step"));
    }
    Ok(k as usize)
}

pub fn simulate_trajectory(
    model: &Model,
    sol: &PeriodicSolution,
    seed: u64,
    index: u64,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    let n = sol.n_steps;
    if sol.sigma_c.len() != n || sol.gain.len() != n {
        return Err(Error::GridMismatch("Σᶜ and K must be sampled on the same grid"));
    }
    let h = sol.step();
    let sub = substeps(h, opts.dt)?;
    let dt = h / sub as f64;
    let sqrt_dt = dt.sqrt();

    let mm = &model.measurement;
    let w_inv = model.w_inv()?;
    let w_chol = mm.w.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    // Innovation gain times the Cholesky factor of W: noise = G_i ξ √dt.
    let noise_gain: Vec<Matrix4x2<f64>> = sol
        .sigma_c
        .iter()
        .map(|s| (s.as_matrix() * mm.c.transpose() + mm.m) * w_inv * w_chol)
        .collect();
    let closed: Vec<Matrix4<f64>> = (0..n).map(|i| model.b * sol.gain[i]).collect();

    let mut rng = trajectory_rng(seed, index);
    let total = opts.n_periods * n;
    let mut samples = Vec::with_capacity(total + 1);
    let mut x = opts.initial;
    samples.push(x);
    let mut step = 0usize;
    for k in 0..total {
        let i = k % n;
        let t0 = k as f64 * h;
        for s in 0..sub {
            let t = t0 + s as f64 * dt;
            let a = model.drift(t) - closed[i];
            let mut next = x + a * x * dt;
            if opts.noise == NoiseMode::Gaussian {
                let xi = Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                next += noise_gain[i] * xi * sqrt_dt;
            }
            x = next;
            step += 1;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        samples.push(x);
    }
    Ok(Trajectory { seed, index, dt, grid_step: h, n_steps: n, samples })
}

/// Sum with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Sample mean and covariance across an ensemble with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: PhaseSpaceVector,
    /// Unbiased sample covariance.
    pub cov: CovMatrix,
    pub stderr_mean: Vector4<f64>,
    /// Standard error of each covariance entry, from the sample variance of
    /// the centred products.
    pub stderr_cov: Matrix4<f64>,
}

pub fn ensemble_stats_from_samples(samples: &[PhaseSpaceVector]) -> Result<EnsembleStats> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter { name: "ensemble", reason: "needs at least two samples" });
    }
    let nf = n as f64;
    let mut mean = Vector4::zeros();
    for a in 0..4 {
        let mut acc = Compensated::default();
        for s in samples {
            acc.add(s[a]);
        }
        mean[a] = acc.value() / nf;
    }
    let mut cov = Matrix4::zeros();
    let mut stderr_cov = Matrix4::zeros();
    for a in 0..4 {
        for b in a..4 {
            let mut acc = Compensated::default();
            for s in samples {
                acc.add((s[a] - mean[a]) * (s[b] - mean[b]));
            }
            let c = acc.value() / (nf - 1.0);
            let mut dev = Compensated::default();
            for s in samples {
                let d = (s[a] - mean[a]) * (s[b] - mean[b]) - c;
                dev.add(d * d);
            }
            let se = (dev.value() / (nf - 1.0) / nf).sqrt();
            cov[(a, b)] = c;
            cov[(b, a)] = c;
            stderr_cov[(a, b)] = se;
            stderr_cov[(b, a)] = se;
        }
    }
    let stderr_mean = Vector4::from_fn(|a, _| (cov[(a, a)] / nf).sqrt());
    Ok(EnsembleStats { n, mean, cov: CovMatrix::symmetrized(&cov), stderr_mean, stderr_cov })
}

/// Statistics of the states at `t = burn_in·T + phase·h` across trajectories.
pub fn ensemble_stats(trajectories: &[Trajectory], burn_in: usize, phase: usize) -> Result<EnsembleStats> {
    let samples = trajectories
        .iter()
        .map(|t| t.at(burn_in, phase).copied().ok_or(Error::GridMismatch("trajectory too short for burn-in")))
        .collect::<Result<Vec<_>>>()?;
    ensemble_stats_from_samples(&samples)
}

/// Largest `|cov − Ξ|/stderr` over the independent entries.
pub fn max_z_score(stats: &EnsembleStats, expected: &CovMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in a..4 {
            let z = (stats.cov[(a, b)] - expected[(a, b)]).abs() / stats.stderr_cov[(a, b)].max(f64::MIN_POSITIVE);
            worst = worst.max(z);
        }
    }
    worst
}
