//! Synthetic daily datasets generated from the realization itself.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fdr::{simulate_state_path, Hw3Fdr, Realization};
use crate::hjm::SimConfig;
use crate::rng::{brownian_increments, path_rng};

use super::{Anchor, Dataset, MarketSnapshot, Theta, DAY};

/// 1–6M, 9M, 1Y–10Y.
pub fn default_maturities() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=6).map(|k| k as f64 / 12.0).collect();
    v.push(0.75);
    v.extend((1..=10).map(|k| k as f64));
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Nelson–Siegel parameters of the initial curves.
    pub y: [f64; 3],
    /// Log-spreads on day 0.
    pub y_m: [f64; 2],
    pub days: usize,
    pub maturities: Vec<f64>,
    /// Standard deviation of the i.i.d. Gaussian noise added to every yield.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            y: [0.05, -0.02, 0.01],
            y_m: [0.001, 0.002],
            days: 80,
            maturities: default_maturities(),
            noise_sd: 0.0,
            seed: 20211119,
        }
    }
}

/// Daily snapshots of the realization driven by one simulated Brownian path.
pub fn synthesize_market_data(theta: &Theta, spec: &SynthSpec) -> Result<Dataset> {
    synthesize_regime_switch(theta, theta, spec.days, spec)
}

/// As `synthesize_market_data`, but the curves of days `≥ switch_day` are generated with `after`.
pub fn synthesize_regime_switch(before: &Theta, after: &Theta, switch_day: usize, spec: &SynthSpec) -> Result<Dataset> {
    before.validate()?;
    after.validate()?;
    if spec.days == 0 {
        return Err(Error::Input("at least one day required".into()));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::Input("noise standard deviation must be non-negative".into()));
    }
    let fdr_before = Hw3Fdr::new(*before, spec.y, spec.y_m)?;
    let fdr_after = Hw3Fdr::new(*after, spec.y, spec.y_m)?;
    let states = if spec.days == 1 {
        vec![vec![0.0; 5]]
    } else {
        let steps = spec.days - 1;
        let mut cfg = SimConfig::new(DAY, steps as f64 * DAY, 1, spec.seed, Vec::new());
        cfg.record_every = 1;
        let inc = brownian_increments(spec.seed, 0, steps, 1, DAY);
        simulate_state_path(&fdr_before, &[0.0; 5], &cfg, &inc)?.states
    };
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Input(e.to_string()))?;
    let mut rng = path_rng(spec.seed, 1);
    let anchor = Anchor {
        origin_date: 0,
        y_m: spec.y_m,
    };
    let snapshots = states
        .iter()
        .enumerate()
        .map(|(date, z)| {
            let mut z = z.clone();
            z[0] = date as f64 * DAY;
            let fdr = if date < switch_day { &fdr_before } else { &fdr_after };
            let bonds = [0, 1, 2].map(|j| {
                spec.maturities
                    .iter()
                    .map(|&x| {
                        let mut yv = fdr.yield_value(j, &z, x);
                        if spec.noise_sd > 0.0 {
                            yv += noise.sample(&mut rng);
                        }
                        (-yv * x).exp()
                    })
                    .collect()
            });
            MarketSnapshot::new(
                date,
                spec.maturities.clone(),
                bonds,
                [fdr.log_spread(1, &z), fdr.log_spread(2, &z)],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::with_anchor(anchor, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta() -> Theta {
        Theta {
            a: [0.3719, 0.3721, 0.3727],
            sigma: [0.1643, 0.1590, 0.1598],
            beta: [0.4814, 0.8825],
        }
    }

    #[test]
    fn deterministic_and_positive() {
        let spec = SynthSpec {
            days: 20,
            noise_sd: 1e-3,
            ..SynthSpec::default()
        };
        let a = synthesize_market_data(&theta(), &spec).unwrap();
        let b = synthesize_market_data(&theta(), &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.snapshots.iter().all(|s| s.log_spreads.iter().all(|y| y.exp() > 0.0)));
    }

    #[test]
    fn single_day_reproduces_embedding() {
        let spec = SynthSpec {
            days: 1,
            ..SynthSpec::default()
        };
        let d = synthesize_market_data(&theta(), &spec).unwrap();
        let fdr = Hw3Fdr::new(theta(), spec.y, spec.y_m).unwrap();
        let s = &d.snapshots[0];
        for j in 0..3 {
            for (k, &x) in s.maturities.iter().enumerate() {
                assert!((s.bonds[j][k] - (-fdr.curve_integral(j, &[0.0; 5], x)).exp()).abs() < 1e-15);
            }
        }
        assert_eq!(s.log_spreads, spec.y_m);
    }
}
