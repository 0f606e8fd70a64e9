//! Bounded Levenberg–Marquardt over `θ` with the inner solve nested per day.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{inner_solve, residual_reduced, Dataset, DayFit, Theta};

/// Forward-difference step relative to `max(|θ_k|, 1e-2)`.
const FD_STEP: f64 = 1e-7;
const PROBE_FACTOR: f64 = 10.0;

/// Box constraints in `Theta::to_vec` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 8],
    pub upper: [f64; 8],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: [1e-4, 1e-6, 1e-4, 1e-6, 1e-4, 1e-6, -1.0, -1.0],
            upper: [1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0, 1.0],
        }
    }
}

impl Bounds {
    pub fn contains(&self, v: &[f64; 8]) -> bool {
        (0..8).all(|k| v[k] >= self.lower[k] && v[k] <= self.upper[k])
    }

    fn project(&self, k: usize, v: f64) -> f64 {
        let (l, u) = (self.lower[k], self.upper[k]);
        let r = if v > u {
            u - (v - u)
        } else if v < l {
            l + (l - v)
        } else {
            v
        };
        r.clamp(l, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOptions {
    pub max_iter: usize,
    /// Stop when an accepted step improves the SSE by less than this fraction.
    pub rel_improvement: f64,
    /// Stop when the step is shorter than this (relative to `1 + ‖θ‖`).
    pub step_tol: f64,
    /// Parameters allowed to move, in `Theta::to_vec` order.
    pub free: [bool; 8],
    /// Condition number of the column-normalized Jacobian above which θ is flagged as weakly identified.
    pub ident_cond: f64,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_improvement: 1e-10,
            step_tol: 1e-12,
            free: [true; 8],
            ident_cond: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    SmallImprovement,
    SmallStep,
    ZeroResidual,
    DampingLimit,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub theta_star: Theta,
    pub per_day: Vec<DayFit>,
    pub total_sse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// SSE of every accepted iterate, starting with `θ0`.
    pub sse_history: Vec<f64>,
    pub condition: f64,
    pub weakly_identified: bool,
}

struct Eval {
    fits: Vec<DayFit>,
    res: Vec<f64>,
    sse: f64,
}

fn evaluate(data: &Dataset, theta: &Theta) -> Result<Eval> {
    let fits = data
        .snapshots
        .par_iter()
        .map(|s| inner_solve(s, &data.anchor, theta))
        .collect::<Result<Vec<_>>>()?;
    let res: Vec<f64> = data
        .snapshots
        .iter()
        .zip(&fits)
        .flat_map(|(s, f)| residual_reduced(s, &data.anchor, theta, &f.reduced, &f.y))
        .collect();
    let sse = res.iter().map(|r| r * r).sum();
    if !f64::is_finite(sse) {
        return Err(Error::Numerical("non-finite SSE".into()));
    }
    Ok(Eval { fits, res, sse })
}

fn jacobian(data: &Dataset, v: &[f64; 8], base: &Eval, bounds: &Bounds, free: &[usize], rel_step: f64) -> Result<DMatrix<f64>> {
    let cols = free
        .par_iter()
        .map(|&k| {
            let mut h = rel_step * v[k].abs().max(1e-2);
            if v[k] + h > bounds.upper[k] {
                h = -h;
            }
            let mut w = *v;
            w[k] += h;
            let e = evaluate(data, &Theta::from_slice(&w))?;
            Ok(e.res.iter().zip(&base.res).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(base.res.len(), free.len(), |r, c| cols[c][r]))
}

/// Condition number of the column-normalized Jacobian. A column whose forward difference changes
/// by more than half when the step grows by `PROBE_FACTOR` is rounding noise: the data does not
/// see that parameter and the condition is infinite.
fn normalized_condition(data: &Dataset, v: &[f64; 8], base: &Eval, bounds: &Bounds, free: &[usize]) -> Result<f64> {
    let j = jacobian(data, v, base, bounds, free, FD_STEP)?;
    let coarse = jacobian(data, v, base, bounds, free, FD_STEP * PROBE_FACTOR)?;
    let mut jn = j.clone();
    for (c, mut col) in jn.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 || (j.column(c) - coarse.column(c)).norm() > 0.5 * n {
            return Ok(f64::INFINITY);
        }
        col /= n;
    }
    let sv = jn.singular_values();
    let (mx, mn) = (sv.max(), sv.min());
    Ok(if mn > 0.0 { mx / mn } else { f64::INFINITY })
}

/// `θ* = argmin Σ_h ‖Res_{t_h}(z₁(t_h,θ), y(t_h,θ); θ)‖²` over the box.
pub fn outer_calibrate(data: &Dataset, theta0: &Theta, bounds: &Bounds, opts: &OuterOptions) -> Result<CalibrationResult> {
    if data.len() < 2 {
        return Err(Error::InsufficientData("at least two snapshots required".into()));
    }
    let mut v = theta0.to_vec();
    if !bounds.contains(&v) {
        return Err(Error::Input("initial parameters outside the bounds".into()));
    }
    let free: Vec<usize> = (0..8).filter(|&k| opts.free[k]).collect();
    let p = free.len();
    let mut cur = evaluate(data, theta0)?;
    let mut evaluations = 1;
    let mut history = vec![cur.sse];
    let mut lambda: f64 = 1e-3;
    let mut nu = 2.0;
    let mut scale = vec![0.0f64; p];
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    'outer: while iterations < opts.max_iter && p > 0 {
        if cur.sse == 0.0 {
            stop = StopReason::ZeroResidual;
            break;
        }
        iterations += 1;
        let j = jacobian(data, &v, &cur, bounds, &free, FD_STEP)?;
        evaluations += p;
        for (c, s) in scale.iter_mut().enumerate() {
            *s = s.max(j.column(c).norm());
        }
        let dscale: Vec<f64> = scale.iter().map(|s| if *s > 0.0 { *s } else { 1.0 }).collect();
        let mut js = j.clone();
        for (c, s) in dscale.iter().enumerate() {
            js.column_mut(c).scale_mut(1.0 / s);
        }
        let svd = js.svd(true, true);
        let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
        let r = DVector::from_column_slice(&cur.res);
        let urhs = u.transpose() * &r;
        loop {
            let coef = DVector::from_fn(svd.singular_values.len(), |i, _| {
                let s = svd.singular_values[i];
                -s * urhs[i] / (s * s + lambda)
            });
            let step_s = vt.transpose() * coef;
            let mut trial = v;
            for (c, &k) in free.iter().enumerate() {
                trial[k] = bounds.project(k, v[k] + step_s[c] / dscale[c]);
            }
            let delta = DVector::from_fn(p, |c, _| trial[free[c]] - v[free[c]]);
            let dnorm = delta.norm();
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if dnorm <= opts.step_tol * (1.0 + vnorm) {
                stop = StopReason::SmallStep;
                break 'outer;
            }
            let next = evaluate(data, &Theta::from_slice(&trial))?;
            evaluations += 1;
            let predicted = cur.sse - (&r + &j * &delta).norm_squared();
            let actual = cur.sse - next.sse;
            if actual > 0.0 {
                let rho = if predicted > 0.0 { actual / predicted } else { 1.0 };
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let small = actual <= opts.rel_improvement * cur.sse;
                v = trial;
                cur = next;
                history.push(cur.sse);
                if small {
                    stop = StopReason::SmallImprovement;
                    break 'outer;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                stop = StopReason::DampingLimit;
                break 'outer;
            }
        }
    }
    if p == 0 {
        stop = StopReason::SmallStep;
    }
    let theta_star = Theta::from_slice(&v);
    let condition = if p > 0 {
        normalized_condition(data, &v, &cur, bounds, &free)?
    } else {
        f64::NAN
    };
    Ok(CalibrationResult {
        theta_star,
        total_sse: cur.sse,
        per_day: cur.fits,
        iterations,
        evaluations,
        converged: stop != StopReason::MaxIterations,
        stop_reason: stop,
        sse_history: history,
        condition,
        weakly_identified: condition > opts.ident_cond,
    })
}

/// SSE at `theta` recomputed from scratch.
pub fn total_sse(data: &Dataset, theta: &Theta) -> Result<f64> {
    Ok(evaluate(data, theta)?.sse)
}
