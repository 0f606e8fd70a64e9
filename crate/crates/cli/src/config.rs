//! Flat `key = value` configuration with `#` comments. Command-line values override the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mchjm_core::calibration::Theta;

use crate::error::{CliError, Result};

/// Seed used when neither the file nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20211119;

/// Initial parameter guess `(a⁰, σ⁰, a¹, σ¹, a², σ², β¹, β²)`.
pub const DEFAULT_THETA: [f64; 8] = [
    0.53041117, 0.00285941, 0.66253001, 0.09546952, 0.65812121, 0.09083773, 0.41734616, 0.82477578,
];

const KNOWN: &[&str] = &[
    "seed", "out", "dataset",
    "a0", "sigma0", "a1", "sigma1", "a2", "sigma2", "beta1", "beta2",
    "ns_y0", "ns_y1", "ns_y2", "y_m1", "y_m2",
    "days", "noise_sd",
    "model", "dt", "horizon", "paths", "dx", "grid_max", "write_paths", "record_dt",
    "martingale_t", "martingale_maturity", "drift_bias",
    "max_iter", "rel_improvement", "step_tol", "ident_cond",
    "family", "nodes", "depth", "states", "beta12", "beta23",
    "window_days", "rolls", "months", "end_date",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses configuration text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Reads `path` (if any), then applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text, &p.display().to_string())?
            }
            None => Self::default(),
        };
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("cannot parse `{key}` = `{v}`"))),
        }
    }

    /// A tolerance or step size; must be strictly positive and finite.
    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.get(key, default)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("`{key}` must be positive, got {v}")))
        }
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v: usize = self.get(key, default)?;
        if v == 0 {
            return Err(CliError::Config(format!("`{key}` must be at least 1")));
        }
        Ok(v)
    }

    pub fn list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("cannot parse `{key}` entry `{s}`")))
                })
                .collect(),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed", DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out").unwrap_or("out"))
    }

    pub fn dataset(&self) -> Result<PathBuf> {
        self.raw("dataset")
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config("no dataset given (use --dataset or `dataset =`)".into()))
    }

    /// Model parameters; keys not present fall back to [`DEFAULT_THETA`].
    pub fn theta(&self) -> Result<Theta> {
        let mut v = [0.0; 8];
        for (k, name) in Theta::NAMES.iter().enumerate() {
            v[k] = self.get(name, DEFAULT_THETA[k])?;
        }
        let th = Theta::from_slice(&v);
        th.validate()?;
        Ok(th)
    }

    /// Nelson–Siegel parameters and initial log-spreads of the synthetic and simulated models.
    pub fn initial_curve(&self) -> Result<([f64; 3], [f64; 2])> {
        Ok((
            [self.get("ns_y0", 0.05)?, self.get("ns_y1", -0.02)?, self.get("ns_y2", 0.01)?],
            [self.get("y_m1", 0.001)?, self.get("y_m2", 0.002)?],
        ))
    }
}
