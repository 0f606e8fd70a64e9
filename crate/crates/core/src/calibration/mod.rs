//! Two-stage calibration of the three-curve Hull–White realization.
//!
//! For fixed `θ` the model yields and log-spreads are affine in the daily unknowns
//! `u = (z₁, y) ∈ R⁷`, so each day is a linear least-squares problem solved by SVD. The outer
//! problem over `θ` is a bounded nonlinear least-squares problem on the projected residuals.
//!
//! The realization state is `z = (τ, z₁)` where `τ` is the time elapsed since the dataset
//! origin (one business day is `1/252` years) and the initial log-spreads `y^M` are the
//! origin's observed log-spreads.

mod analysis;
mod outer;
mod synth;

pub use analysis::{error_metrics, stability_analysis, window_sweep, ErrorMetrics, StabilityReport, SweepRow};
pub use outer::{outer_calibrate, total_sse, Bounds, CalibrationResult, OuterOptions, StopReason};
pub use synth::{default_maturities, synthesize_market_data, synthesize_regime_switch, SynthSpec};

pub use crate::fdr::Theta;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fdr::Hw3Fdr;

/// Year fraction of one business day.
pub const DAY: f64 = 1.0 / 252.0;
/// Business days per month.
pub const MONTH_DAYS: usize = 21;
/// Relative singular-value cutoff of the inner solve.
pub const INNER_CUTOFF: f64 = 1e-12;

/// Bond prices and log-spreads observed on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub date: usize,
    pub maturities: Vec<f64>,
    /// `bonds[j][k] = B^j(x_k)`.
    pub bonds: [Vec<f64>; 3],
    pub log_spreads: [f64; 2],
}

impl MarketSnapshot {
    pub fn new(date: usize, maturities: Vec<f64>, bonds: [Vec<f64>; 3], log_spreads: [f64; 2]) -> Result<Self> {
        if maturities.is_empty() || maturities.windows(2).any(|w| !(w[1] > w[0])) || !(maturities[0] > 0.0) {
            return Err(Error::Input("maturities must be positive and strictly increasing".into()));
        }
        if bonds.iter().any(|b| b.len() != maturities.len()) {
            return Err(Error::Dimension("one bond price per maturity and curve".into()));
        }
        if bonds.iter().flatten().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::Input(format!("non-positive bond price on date {date}")));
        }
        if log_spreads.iter().any(|y| !y.is_finite()) {
            return Err(Error::Input(format!("non-finite log-spread on date {date}")));
        }
        Ok(Self {
            date,
            maturities,
            bonds,
            log_spreads,
        })
    }

    pub fn n(&self) -> usize {
        self.maturities.len()
    }

    /// Market yields `−log B^j(x_k) / x_k`.
    pub fn yields(&self, j: usize) -> Vec<f64> {
        self.bonds[j].iter().zip(&self.maturities).map(|(b, x)| -b.ln() / x).collect()
    }
}

/// Reference point of the realization: the origin date and its log-spreads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub origin_date: usize,
    pub y_m: [f64; 2],
}

impl Anchor {
    pub fn elapsed(&self, date: usize) -> f64 {
        (date as f64 - self.origin_date as f64) * DAY
    }
}

/// Consecutive daily snapshots plus the realization anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub anchor: Anchor,
    pub snapshots: Vec<MarketSnapshot>,
}

impl Dataset {
    /// Anchors at the first snapshot.
    pub fn new(snapshots: Vec<MarketSnapshot>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::InsufficientData("empty dataset".into()))?;
        let anchor = Anchor {
            origin_date: first.date,
            y_m: first.log_spreads,
        };
        Self::with_anchor(anchor, snapshots)
    }

    pub fn with_anchor(anchor: Anchor, snapshots: Vec<MarketSnapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InsufficientData("empty dataset".into()));
        }
        for w in snapshots.windows(2) {
            if w[1].date != w[0].date + 1 {
                return Err(Error::Input(format!("dates not contiguous at {}", w[1].date)));
            }
            if w[1].maturities != w[0].maturities {
                return Err(Error::Input(format!("maturity set changes on date {}", w[1].date)));
            }
        }
        if snapshots[0].date < anchor.origin_date {
            return Err(Error::Input("snapshots precede the anchor".into()));
        }
        Ok(Self { anchor, snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first_date(&self) -> usize {
        self.snapshots[0].date
    }

    pub fn last_date(&self) -> usize {
        self.snapshots[self.len() - 1].date
    }

    /// Sub-window of `len` days starting at `start`, keeping the anchor.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start < self.first_date() || start + len - 1 > self.last_date() {
            return Err(Error::InsufficientData(format!(
                "window [{start}, {}] outside the dataset [{}, {}]",
                start + len.max(1) - 1,
                self.first_date(),
                self.last_date()
            )));
        }
        let off = start - self.first_date();
        Ok(Self {
            anchor: self.anchor,
            snapshots: self.snapshots[off..off + len].to_vec(),
        })
    }
}

fn realization(theta: &Theta, y: &[f64; 3], anchor: &Anchor) -> Hw3Fdr {
    Hw3Fdr::unchecked(*theta, *y, anchor.y_m)
}

fn state(anchor: &Anchor, date: usize, z1: &[f64; 4]) -> [f64; 5] {
    [anchor.elapsed(date), z1[0], z1[1], z1[2], z1[3]]
}

fn reduced(theta: &Theta, y: &[f64; 3], anchor: &Anchor, date: usize, z1: &[f64; 4]) -> [f64; 4] {
    realization(theta, y, anchor).reduced_state(&state(anchor, date, z1))
}

/// Model yields `(1/x)∫_0^x G^j` at the snapshot maturities.
pub fn model_yields(theta: &Theta, anchor: &Anchor, date: usize, z1: &[f64; 4], y: &[f64; 3], maturities: &[f64]) -> [Vec<f64>; 3] {
    yields_reduced(theta, anchor, date, &reduced(theta, y, anchor, date, z1), y, maturities)
}

/// Model log-spreads `G^3, G^4`.
pub fn model_log_spreads(theta: &Theta, anchor: &Anchor, date: usize, z1: &[f64; 4], y: &[f64; 3]) -> [f64; 2] {
    spreads_reduced(theta, anchor, date, &reduced(theta, y, anchor, date, z1), y)
}

pub(crate) fn yields_reduced(theta: &Theta, anchor: &Anchor, date: usize, q: &[f64; 4], y: &[f64; 3], maturities: &[f64]) -> [Vec<f64>; 3] {
    let fdr = realization(theta, y, anchor);
    let tau = anchor.elapsed(date);
    [0, 1, 2].map(|j| maturities.iter().map(|&x| fdr.curve_integral_reduced(j, tau, q, x) / x).collect())
}

pub(crate) fn spreads_reduced(theta: &Theta, anchor: &Anchor, date: usize, q: &[f64; 4], y: &[f64; 3]) -> [f64; 2] {
    let fdr = realization(theta, y, anchor);
    let tau = anchor.elapsed(date);
    [fdr.log_spread_reduced(1, tau, q), fdr.log_spread_reduced(2, tau, q)]
}

/// Residual vector of length `3n + 2`: all curve-0 yield rows, then curve 1, curve 2, then the two spreads.
pub fn residual(snap: &MarketSnapshot, anchor: &Anchor, theta: &Theta, z1: &[f64; 4], y: &[f64; 3]) -> Vec<f64> {
    residual_reduced(snap, anchor, theta, &reduced(theta, y, anchor, snap.date, z1), y)
}

/// Residual with `z₁` given through `Hw3Fdr::reduced_state`.
pub(crate) fn residual_reduced(snap: &MarketSnapshot, anchor: &Anchor, theta: &Theta, q: &[f64; 4], y: &[f64; 3]) -> Vec<f64> {
    let fdr = realization(theta, y, anchor);
    let tau = anchor.elapsed(snap.date);
    let mut out = Vec::with_capacity(3 * snap.n() + 2);
    for j in 0..3 {
        for (k, &x) in snap.maturities.iter().enumerate() {
            out.push((-fdr.curve_integral_reduced(j, tau, q, x) - snap.bonds[j][k].ln()) / x);
        }
    }
    out.push(fdr.log_spread_reduced(1, tau, q) - snap.log_spreads[0]);
    out.push(fdr.log_spread_reduced(2, tau, q) - snap.log_spreads[1]);
    out
}

/// Residual at the packed unknowns `u = (z₁, y)`.
pub fn residual_at(snap: &MarketSnapshot, anchor: &Anchor, theta: &Theta, u: &[f64; 7]) -> Vec<f64> {
    residual(snap, anchor, theta, &[u[0], u[1], u[2], u[3]], &[u[4], u[5], u[6]])
}

/// Per-day outcome of the inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DayFit {
    pub date: usize,
    pub z1: [f64; 4],
    /// `z₁` in the coordinates of `Hw3Fdr::reduced_state`, where the fit is carried out.
    pub reduced: [f64; 4],
    pub y: [f64; 3],
    pub residual_norm: f64,
    /// The affine map had numerical rank below 7; the minimal-norm solution was returned.
    pub rank_deficient: bool,
}

/// Minimal-norm least-squares solution of the affine map `u ↦ f(u)` on `R⁷`, and its numerical rank.
fn affine_solve(date: usize, f: impl Fn(&[f64; 7]) -> Vec<f64>) -> Result<([f64; 7], usize)> {
    let base = f(&[0.0; 7]);
    let rows = base.len();
    let mut a = DMatrix::zeros(rows, 7);
    for k in 0..7 {
        let mut u = [0.0; 7];
        u[k] = 1.0;
        let r = f(&u);
        for i in 0..rows {
            a[(i, k)] = r[i] - base[i];
        }
    }
    let c = DVector::from_vec(base);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !smax.is_finite() {
        return Err(Error::Numerical(format!("non-finite residual on date {date}")));
    }
    let cut = INNER_CUTOFF * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    let sol = svd
        .solve(&(-&c), cut)
        .map_err(|e| Error::Numerical(format!("inner SVD solve failed: {e}")))?;
    Ok((std::array::from_fn(|k| sol[k]), rank))
}

/// Minimizes `‖Res_t(z₁, y; θ)‖` over `(z₁, y)` from the affine structure.
///
/// The solve runs in the reduced coordinates, which stay well conditioned when mean reversions
/// nearly coincide; `z₁` is recovered afterwards. With exactly coinciding mean reversions the
/// solve falls back to `z₁` itself.
pub fn inner_solve(snap: &MarketSnapshot, anchor: &Anchor, theta: &Theta) -> Result<DayFit> {
    let (u, rank) = affine_solve(snap.date, |u| {
        residual_reduced(snap, anchor, theta, &[u[0], u[1], u[2], u[3]], &[u[4], u[5], u[6]])
    })?;
    let (q, y) = ([u[0], u[1], u[2], u[3]], [u[4], u[5], u[6]]);
    let fit = match realization(theta, &y, anchor).state_from_reduced(&q) {
        Ok(z1) => (z1, q, y, rank),
        Err(_) => {
            let (u, rank) = affine_solve(snap.date, |u| residual_at(snap, anchor, theta, u))?;
            let (z1, y) = ([u[0], u[1], u[2], u[3]], [u[4], u[5], u[6]]);
            (z1, reduced(theta, &y, anchor, snap.date, &z1), y, rank)
        }
    };
    let (z1, q, y, rank) = fit;
    let r = residual_reduced(snap, anchor, theta, &q, &y);
    Ok(DayFit {
        date: snap.date,
        z1,
        reduced: q,
        y,
        residual_norm: r.iter().map(|v| v * v).sum::<f64>().sqrt(),
        rank_deficient: rank < 7,
    })
}
