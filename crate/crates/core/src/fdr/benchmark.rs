//! Benchmark coordinates: state variables `Z^h = α^h · G(z, x_h)` built from forward
//! rates and log-spreads at fixed maturities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::path_rng;

use super::Realization;

/// Invertibility threshold on the condition number of `K_n`.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct BenchmarkCoordinates {
    pub maturities: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    /// `K_n[h][k] = α^h · ê_k(x_h)`.
    pub k_matrix: DMatrix<f64>,
    pub condition: f64,
    pub invertible: bool,
}

fn condition_number(k: &DMatrix<f64>) -> f64 {
    let sv = k.singular_values();
    let (mx, mn) = (sv.max(), sv.min());
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

fn k_matrix(fdr: &dyn Realization, z: &[f64], maturities: &[f64], coeffs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = fdr.n();
    DMatrix::from_fn(n, n, |h, k| {
        fdr.tangent(z, k, maturities[h])
            .iter()
            .zip(&coeffs[h])
            .map(|(e, a)| e * a)
            .sum()
    })
}

fn validate(fdr: &dyn Realization, z: &[f64], maturities: &[f64], coeffs: Option<&[Vec<f64>]>) -> Result<()> {
    let n = fdr.n();
    if z.len() != n || maturities.len() != n {
        return Err(Error::Dimension(format!("need a state and {n} maturities")));
    }
    if let Some(c) = coeffs {
        let w = 2 * fdr.m() + 1;
        if c.len() != n || c.iter().any(|a| a.len() != w) {
            return Err(Error::Dimension(format!("need {n} coefficient vectors of length {w}")));
        }
    }
    if maturities.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Domain("maturities must be non-negative".into()));
    }
    Ok(())
}

/// Builds `K_n` at `z` and reports whether the benchmark map is a local coordinate system.
pub fn benchmark_coordinates(
    fdr: &dyn Realization,
    z: &[f64],
    maturities: &[f64],
    coeffs: &[Vec<f64>],
) -> Result<BenchmarkCoordinates> {
    validate(fdr, z, maturities, Some(coeffs))?;
    let k = k_matrix(fdr, z, maturities, coeffs);
    let condition = condition_number(&k);
    Ok(BenchmarkCoordinates {
        maturities: maturities.to_vec(),
        coeffs: coeffs.to_vec(),
        k_matrix: k,
        condition,
        invertible: condition < MAX_CONDITION,
    })
}

impl BenchmarkCoordinates {
    /// `(α^h · G(z, x_h))_h`.
    pub fn observables(&self, fdr: &dyn Realization, z: &[f64]) -> Vec<f64> {
        self.maturities
            .iter()
            .zip(&self.coeffs)
            .map(|(&x, a)| fdr.embed(z, x).iter().zip(a).map(|(g, c)| g * c).sum())
            .collect()
    }

    /// Newton solve of `observables(z) = obs` starting from `z_start`.
    pub fn state_from_observables(&self, fdr: &dyn Realization, obs: &[f64], z_start: &[f64]) -> Result<Vec<f64>> {
        if !self.invertible {
            return Err(Error::Numerical(format!(
                "benchmark map is singular (condition {:.3e})",
                self.condition
            )));
        }
        let mut z = DVector::from_column_slice(z_start);
        let target = DVector::from_column_slice(obs);
        for _ in 0..50 {
            let r = DVector::from_vec(self.observables(fdr, z.as_slice())) - &target;
            let k = k_matrix(fdr, z.as_slice(), &self.maturities, &self.coeffs);
            let step = k
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Numerical("singular Jacobian in Newton iteration".into()))?;
            z -= &step;
            if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                return Ok(z.as_slice().to_vec());
            }
        }
        let r = DVector::from_vec(self.observables(fdr, z.as_slice())) - &target;
        if r.norm() <= 1e-12 * (1.0 + target.norm()) {
            Ok(z.as_slice().to_vec())
        } else {
            Err(Error::Numerical("Newton iteration did not converge".into()))
        }
    }
}

/// Outcome of the randomized coefficient search.
#[derive(Debug, Clone)]
pub struct BenchmarkSearch {
    pub best: BenchmarkCoordinates,
    /// Condition number of every trial, in trial order.
    pub trial_conditions: Vec<f64>,
}

/// Draws `trials` coefficient sets uniformly from `[−1, 1]^{2m+1}` and keeps the best conditioned.
pub fn choose_benchmark_coefficients(
    fdr: &dyn Realization,
    z: &[f64],
    maturities: &[f64],
    trials: usize,
    seed: u64,
) -> Result<BenchmarkSearch> {
    if trials == 0 {
        return Err(Error::Input("at least one trial required".into()));
    }
    validate(fdr, z, maturities, None)?;
    let (n, w) = (fdr.n(), 2 * fdr.m() + 1);
    let tangents: Vec<Vec<Vec<f64>>> = maturities
        .iter()
        .map(|&x| (0..n).map(|k| fdr.tangent(z, k, x)).collect())
        .collect();
    let mut rng = path_rng(seed, 0);
    let mut best: Option<(f64, Vec<Vec<f64>>, DMatrix<f64>)> = None;
    let mut conds = Vec::with_capacity(trials);
    for _ in 0..trials {
        let coeffs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..w).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let k = DMatrix::from_fn(n, n, |h, kk| {
            tangents[h][kk].iter().zip(&coeffs[h]).map(|(e, a)| e * a).sum()
        });
        let c = condition_number(&k);
        conds.push(c);
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, coeffs, k));
        }
    }
    let (condition, coeffs, k) = best.expect("trials ≥ 1");
    if !(condition < MAX_CONDITION) {
        return Err(Error::Numerical(format!(
            "every trial produced a singular benchmark matrix (best condition {condition:.3e})"
        )));
    }
    Ok(BenchmarkSearch {
        best: BenchmarkCoordinates {
            maturities: maturities.to_vec(),
            coeffs,
            k_matrix: k,
            condition,
            invertible: true,
        },
        trial_conditions: conds,
    })
}
