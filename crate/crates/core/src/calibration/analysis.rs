//! Fit quality, window-length sweeps and rolling-window stability.

use crate::error::{Error, Result};

use super::{
    outer_calibrate, spreads_reduced, yields_reduced, Bounds, CalibrationResult, Dataset, OuterOptions, Theta,
    MONTH_DAYS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    /// `‖G^j − M^j‖ / ‖M^j‖` over the maturities on the last day.
    pub yield_errors: [f64; 3],
    /// Relative ℓ² error of each log-spread series over the window.
    pub spread_errors: [f64; 2],
    /// Relative error of each log-spread on the last day.
    pub end_spread_errors: [f64; 2],
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::Domain(format!("zero-norm market {what}")));
    }
    Ok(num / den)
}

pub fn error_metrics(result: &CalibrationResult, data: &Dataset) -> Result<ErrorMetrics> {
    if result.per_day.len() != data.len() {
        return Err(Error::Dimension("result and dataset cover different days".into()));
    }
    let theta = &result.theta_star;
    let last = data.len() - 1;
    let (snap, fit) = (&data.snapshots[last], &result.per_day[last]);
    let model = yields_reduced(theta, &data.anchor, snap.date, &fit.reduced, &fit.y, &snap.maturities);
    let mut yield_errors = [0.0; 3];
    for j in 0..3 {
        let market = snap.yields(j);
        let num = market.iter().zip(&model[j]).map(|(m, g)| (g - m).powi(2)).sum::<f64>().sqrt();
        let den = market.iter().map(|m| m * m).sum::<f64>().sqrt();
        yield_errors[j] = ratio(num, den, "yield curve")?;
    }
    let spreads: Vec<[f64; 2]> = data
        .snapshots
        .iter()
        .zip(&result.per_day)
        .map(|(s, f)| spreads_reduced(theta, &data.anchor, s.date, &f.reduced, &f.y))
        .collect();
    let mut spread_errors = [0.0; 2];
    let mut end_spread_errors = [0.0; 2];
    for j in 0..2 {
        let num: f64 = data
            .snapshots
            .iter()
            .zip(&spreads)
            .map(|(s, g)| (g[j] - s.log_spreads[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = data.snapshots.iter().map(|s| s.log_spreads[j].powi(2)).sum::<f64>().sqrt();
        spread_errors[j] = ratio(num, den, "log-spread series")?;
        let m = snap.log_spreads[j];
        end_spread_errors[j] = ratio((spreads[last][j] - m).abs(), m.abs(), "log-spread")?;
    }
    Ok(ErrorMetrics {
        yield_errors,
        spread_errors,
        end_spread_errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub months: usize,
    pub days: usize,
    /// `None` when the window does not fit in the dataset.
    pub metrics: Option<ErrorMetrics>,
    pub theta: Option<Theta>,
    pub converged: bool,
}

/// Calibrates every trailing window of `months` months ending on `end_date` from the same `theta0`.
pub fn window_sweep(
    data: &Dataset,
    months: &[usize],
    end_date: usize,
    theta0: &Theta,
    bounds: &Bounds,
    opts: &OuterOptions,
) -> Result<Vec<SweepRow>> {
    if end_date < data.first_date() || end_date > data.last_date() {
        return Err(Error::InsufficientData(format!("end date {end_date} outside the dataset")));
    }
    months
        .iter()
        .map(|&mo| {
            let days = mo * MONTH_DAYS;
            let skipped = SweepRow {
                months: mo,
                days,
                metrics: None,
                theta: None,
                converged: false,
            };
            if days < 2 || days > end_date + 1 - data.first_date() {
                return Ok(skipped);
            }
            let w = data.window(end_date + 1 - days, days)?;
            let res = outer_calibrate(&w, theta0, bounds, opts)?;
            Ok(SweepRow {
                metrics: Some(error_metrics(&res, &w)?),
                theta: Some(res.theta_star),
                converged: res.converged,
                ..skipped
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Calibrated parameters per roll (`None` if that roll failed or did not converge).
    pub thetas: Vec<Option<Theta>>,
    pub mean: [f64; 8],
    /// Sample standard deviation (zero for a single roll).
    pub std: [f64; 8],
    /// Rolls excluded from the statistics.
    pub excluded: Vec<usize>,
}

/// Calibrates `rolls` windows of `window_days` days, each starting one day after the previous
/// one and warm-started from the previous estimate.
pub fn stability_analysis(
    data: &Dataset,
    window_days: usize,
    rolls: usize,
    theta0: &Theta,
    bounds: &Bounds,
    opts: &OuterOptions,
) -> Result<StabilityReport> {
    if rolls == 0 || window_days < 2 {
        return Err(Error::Input("need at least one roll and two days per window".into()));
    }
    let needed = window_days + rolls - 1;
    if data.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{rolls} rolls of {window_days} days need {needed} days, dataset has {}",
            data.len()
        )));
    }
    let mut guess = *theta0;
    let mut thetas = Vec::with_capacity(rolls);
    let mut excluded = Vec::new();
    for r in 0..rolls {
        let w = data.window(data.first_date() + r, window_days)?;
        match outer_calibrate(&w, &guess, bounds, opts) {
            Ok(res) if res.converged => {
                guess = res.theta_star;
                thetas.push(Some(res.theta_star));
            }
            _ => {
                excluded.push(r);
                thetas.push(None);
            }
        }
    }
    let good: Vec<[f64; 8]> = thetas.iter().flatten().map(|t| t.to_vec()).collect();
    if good.is_empty() {
        return Err(Error::Numerical("no roll converged".into()));
    }
    let n = good.len() as f64;
    let mean: [f64; 8] = std::array::from_fn(|k| good.iter().map(|v| v[k]).sum::<f64>() / n);
    let std: [f64; 8] = std::array::from_fn(|k| {
        if good.len() < 2 {
            0.0
        } else {
            (good.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    });
    Ok(StabilityReport {
        thetas,
        mean,
        std,
        excluded,
    })
}
