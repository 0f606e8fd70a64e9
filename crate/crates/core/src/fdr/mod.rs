//! Finite-dimensional realizations `r̂_t = G(Z_t)` and their Stratonovich state dynamics.

mod benchmark;
mod cdv;
mod constant_vol;
mod hw3;

pub use benchmark::{benchmark_coordinates, choose_benchmark_coefficients, BenchmarkCoordinates, BenchmarkSearch};
pub use cdv::{CdvExampleFdr, CdvParams};
pub use constant_vol::{ConstantVolFdr, FactorBlock};
pub use hw3::{Hw3Fdr, Theta};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hjm::SimConfig;
use crate::rng::brownian_increments;

/// A finite-dimensional realization: embedding `G(z, x)` plus state coefficients.
pub trait Realization: Send + Sync {
    /// State dimension `n`.
    fn n(&self) -> usize;
    /// Number of tenors.
    fn m(&self) -> usize;
    /// Number of Brownian factors.
    fn d(&self) -> usize;
    /// Forward curve `j` at maturity `x`.
    fn curve(&self, j: usize, z: &[f64], x: f64) -> f64;
    /// Log-spread `j` in `1..=m`.
    fn log_spread(&self, j: usize, z: &[f64]) -> f64;
    /// Stratonovich drift `a(z)`.
    fn drift(&self, z: &[f64]) -> Vec<f64>;
    /// Diffusion `b(z)`, `n × d`.
    fn diffusion(&self, z: &[f64]) -> Vec<Vec<f64>>;

    /// `(G^0(z,x), …, G^m(z,x), G^{m+1}(z), …, G^{2m}(z))`.
    fn embed(&self, z: &[f64], x: f64) -> Vec<f64> {
        let m = self.m();
        (0..=m)
            .map(|j| self.curve(j, z, x))
            .chain((1..=m).map(|j| self.log_spread(j, z)))
            .collect()
    }

    /// `∂G/∂z_k` at maturity `x` by central differences.
    fn tangent(&self, z: &[f64], k: usize, x: f64) -> Vec<f64> {
        let h = 1e-6 * (1.0 + z[k].abs());
        let mut up = z.to_vec();
        let mut dn = z.to_vec();
        up[k] += h;
        dn[k] -= h;
        self.embed(&up, x)
            .into_iter()
            .zip(self.embed(&dn, x))
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect()
    }
}

/// A state path at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates `dZ = a dt + b ∘ dW` from `z0` with the Heun predictor–corrector,
/// using the supplied increments verbatim.
pub fn simulate_state_path(
    fdr: &dyn Realization,
    z0: &[f64],
    cfg: &SimConfig,
    increments: &[Vec<f64>],
) -> Result<StatePath> {
    let steps = cfg.steps()?;
    let (n, d) = (fdr.n(), fdr.d());
    if z0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} coordinates, need {n}", z0.len())));
    }
    if increments.len() != steps || increments.iter().any(|w| w.len() != d) {
        return Err(Error::Dimension(format!("need {steps}×{d} Brownian increments")));
    }
    let mut z = z0.to_vec();
    let mut t = 0.0;
    let mut out = StatePath {
        times: vec![0.0],
        states: vec![z.clone()],
    };
    let mut pred = vec![0.0; n];
    for (step, dw) in increments.iter().enumerate() {
        let a0 = fdr.drift(&z);
        let b0 = fdr.diffusion(&z);
        for r in 0..n {
            pred[r] = z[r] + a0[r] * cfg.dt + (0..d).map(|i| b0[r][i] * dw[i]).sum::<f64>();
        }
        let a1 = fdr.drift(&pred);
        let b1 = fdr.diffusion(&pred);
        for r in 0..n {
            let noise: f64 = (0..d).map(|i| (b0[r][i] + b1[r][i]) * dw[i]).sum();
            z[r] += 0.5 * (a0[r] + a1[r]) * cfg.dt + 0.5 * noise;
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite FDR state at step {}", step + 1)));
        }
        t += cfg.dt;
        let s = step + 1;
        if s == steps || (cfg.record_every > 0 && s % cfg.record_every == 0) {
            out.times.push(t);
            out.states.push(z.clone());
        }
    }
    Ok(out)
}

/// Simulates `cfg.n_paths` state paths from the origin with per-path Brownian streams.
pub fn simulate_state(fdr: &dyn Realization, cfg: &SimConfig) -> Result<Vec<StatePath>> {
    let steps = cfg.steps()?;
    let z0 = vec![0.0; fdr.n()];
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = brownian_increments(cfg.seed, p as u64, steps, fdr.d(), cfg.dt);
            simulate_state_path(fdr, &z0, cfg, &inc)
        })
        .collect()
}
