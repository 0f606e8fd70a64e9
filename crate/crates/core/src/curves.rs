//! Forward curves in the Musiela parametrization and the multi-curve state
//! `(r^0, …, r^m, Y^1, …, Y^m)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qe::QeFunction;

/// Default maturity grid: `0:0.05:10` years.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(10.0, 0.05)
}

/// `0, h, 2h, …, max` (the step must divide `max`).
pub fn uniform_grid(max: f64, h: f64) -> Vec<f64> {
    let n = (max / h).round() as usize;
    (0..=n).map(|k| k as f64 * h).collect()
}

/// Nelson–Siegel curve `y0 + y1 e^{-ax} + y2 x e^{-ax}`.
pub fn nelson_siegel(y: [f64; 3], a: f64) -> QeFunction {
    &QeFunction::constant(y[0]) + &QeFunction::poly_exp(&[y[1], y[2]], -a)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardCurve {
    Analytic(QeFunction),
    Sampled(SampledCurve),
}

/// Curve values on a strictly increasing maturity grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub grid: Arc<Vec<f64>>,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: Arc<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::Dimension("grid and values must match, at least 2 nodes".into()));
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("grid must start at 0 and increase strictly".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("curve values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    fn locate(&self, x: f64) -> usize {
        // index k with grid[k] <= x < grid[k+1], clamped to the last cell
        let g = &self.grid;
        match g.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => k.min(g.len() - 2),
            Err(k) => k.saturating_sub(1).min(g.len() - 2),
        }
    }

    /// Linear interpolation, flat beyond the last node.
    pub fn value(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x >= *g.last().unwrap() {
            return *self.values.last().unwrap();
        }
        if x <= 0.0 {
            return self.values[0];
        }
        let k = self.locate(x);
        let w = (x - g[k]) / (g[k + 1] - g[k]);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoidal `∫_0^x r`, exact for the piecewise-linear interpolant.
    pub fn integral(&self, x: f64) -> Result<f64> {
        let g = &self.grid;
        let last = *g.last().unwrap();
        if x < 0.0 || x > last * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("maturity {x} outside curve grid [0, {last}]")));
        }
        let x = x.min(last);
        let mut acc = 0.0;
        let mut k = 0;
        while k + 1 < g.len() && g[k + 1] <= x {
            acc += 0.5 * (self.values[k] + self.values[k + 1]) * (g[k + 1] - g[k]);
            k += 1;
        }
        if k + 1 < g.len() && x > g[k] {
            acc += 0.5 * (self.values[k] + self.value(x)) * (x - g[k]);
        }
        Ok(acc)
    }

    /// Central differences inside, one-sided at the ends.
    pub fn derivative(&self) -> Vec<f64> {
        let g = &self.grid;
        let v = &self.values;
        let n = g.len();
        (0..n)
            .map(|k| {
                if k == 0 {
                    (v[1] - v[0]) / (g[1] - g[0])
                } else if k == n - 1 {
                    (v[n - 1] - v[n - 2]) / (g[n - 1] - g[n - 2])
                } else {
                    (v[k + 1] - v[k - 1]) / (g[k + 1] - g[k - 1])
                }
            })
            .collect()
    }
}

impl ForwardCurve {
    pub fn flat(r: f64) -> Self {
        Self::Analytic(QeFunction::constant(r))
    }

    /// Samples the curve on `grid` (analytic curves are evaluated, sampled curves interpolated).
    pub fn sample(&self, grid: &Arc<Vec<f64>>) -> Result<SampledCurve> {
        SampledCurve::new(grid.clone(), grid.iter().map(|&x| self.value(x)).collect())
    }

    /// `r(x)`; sampled curves are extrapolated flat beyond their grid.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Analytic(f) => f.evaluate(x),
            Self::Sampled(s) => s.value(x),
        }
    }

    /// `r(0)`.
    pub fn short_rate(&self) -> f64 {
        match self {
            Self::Analytic(f) => f.eval_at_zero(),
            Self::Sampled(s) => s.values[0],
        }
    }

    /// `∫_0^x r(u) du`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("negative maturity {x}")));
        }
        match self {
            Self::Analytic(f) => Ok(f.integrate_from_zero().evaluate(x)),
            Self::Sampled(s) => s.integral(x),
        }
    }

    /// True when the curve is sampled and `x` lies beyond its last node.
    pub fn is_extrapolated(&self, x: f64) -> bool {
        matches!(self, Self::Sampled(s) if x > *s.grid.last().unwrap())
    }

    /// Rebuilds a sampled curve from yields via `r = d/dx (x·y(x))`.
    pub fn from_yields(grid: Arc<Vec<f64>>, yields: &[f64]) -> Result<Self> {
        if grid.len() != yields.len() {
            return Err(Error::Dimension("grid and yields differ in length".into()));
        }
        let xy: Vec<f64> = grid.iter().zip(yields).map(|(x, y)| x * y).collect();
        let s = SampledCurve::new(grid, xy)?;
        let d = s.derivative();
        Ok(Self::Sampled(SampledCurve::new(s.grid, d)?))
    }
}

/// `B(x) = exp(−∫_0^x r)`.
pub fn bond_price(curve: &ForwardCurve, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok((-curve.integral(x)?).exp())
}

/// `(1/x)∫_0^x r = −log B(x)/x`.
pub fn yield_value(curve: &ForwardCurve, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("yield undefined at non-positive maturity".into()));
    }
    Ok(curve.integral(x)? / x)
}

/// Simply compounded forward rate `(B(T)/B(T+δ) − 1)/δ`.
pub fn simple_forward_rate(curve: &ForwardCurve, t: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain("tenor length must be positive".into()));
    }
    Ok((bond_price(curve, t)? / bond_price(curve, t + delta)? - 1.0) / delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TenorStructure {
    tenors: Vec<f64>,
}

impl TenorStructure {
    pub fn new(tenors: Vec<f64>) -> Result<Self> {
        if tenors.is_empty() {
            return Err(Error::Input("at least one tenor required".into()));
        }
        if tenors[0] <= 0.0 || tenors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("tenors must be positive and strictly increasing".into()));
        }
        Ok(Self { tenors })
    }

    pub fn m(&self) -> usize {
        self.tenors.len()
    }

    /// Tenor `δ_j` for `j` in `1..=m`.
    pub fn delta(&self, j: usize) -> f64 {
        self.tenors[j - 1]
    }
}

/// `r̂ = (r^0, …, r^m, Y^1, …, Y^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCurveState {
    pub curves: Vec<ForwardCurve>,
    pub log_spreads: Vec<f64>,
}

impl MultiCurveState {
    pub fn new(curves: Vec<ForwardCurve>, log_spreads: Vec<f64>) -> Result<Self> {
        if curves.len() != log_spreads.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} curves need {} log-spreads, got {}",
                curves.len(),
                curves.len().saturating_sub(1),
                log_spreads.len()
            )));
        }
        Ok(Self { curves, log_spreads })
    }

    pub fn m(&self) -> usize {
        self.log_spreads.len()
    }

    /// Multiplicative spreads `S^j = exp(Y^j)`.
    pub fn spreads(&self) -> Vec<f64> {
        self.log_spreads.iter().map(|y| y.exp()).collect()
    }

    /// Diagnostic: spreads non-decreasing in the tenor length.
    pub fn spreads_increasing(&self) -> bool {
        self.log_spreads.windows(2).all(|w| w[0] <= w[1])
    }

    /// Sup-norm over the default grid (analytic curves) or the sampling nodes.
    pub fn sup_norm(&self) -> f64 {
        let grid = default_grid();
        let mut m = self.log_spreads.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for c in &self.curves {
            let v = match c {
                ForwardCurve::Analytic(f) => grid.iter().fold(0.0f64, |a, &x| a.max(f.evaluate(x).abs())),
                ForwardCurve::Sampled(s) => s.values.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            };
            m = m.max(v);
        }
        m
    }

    /// `self + h·(curves, spreads)` with curve directions given as QE functions.
    pub fn perturbed(&self, h: f64, curves: &[QeFunction], spreads: &[f64]) -> Self {
        let new_curves = self
            .curves
            .iter()
            .zip(curves)
            .map(|(c, d)| match c {
                ForwardCurve::Analytic(f) => ForwardCurve::Analytic(f + &d.scale(h)),
                ForwardCurve::Sampled(s) => ForwardCurve::Sampled(SampledCurve {
                    grid: s.grid.clone(),
                    values: s
                        .grid
                        .iter()
                        .zip(&s.values)
                        .map(|(&x, v)| v + h * d.evaluate(x))
                        .collect(),
                }),
            })
            .collect();
        let log_spreads = self.log_spreads.iter().zip(spreads).map(|(y, d)| y + h * d).collect();
        Self {
            curves: new_curves,
            log_spreads,
        }
    }
}

/// Forward rate `L^j(T, T+δ_j)` implied by the fictitious bond of curve `j`:
/// `1 + δ L^j(T) = S^j B^j(T) / B^0(T+δ)`.
pub fn implied_risk_sensitive_rate(
    state: &MultiCurveState,
    tenors: &TenorStructure,
    j: usize,
    t: f64,
) -> Result<f64> {
    if j == 0 || j > state.m() || tenors.m() != state.m() {
        return Err(Error::Dimension(format!("tenor index {j} outside 1..={}", state.m())));
    }
    let delta = tenors.delta(j);
    let s = state.log_spreads[j - 1].exp();
    let bj = bond_price(&state.curves[j], t)?;
    let b0 = bond_price(&state.curves[0], t + delta)?;
    if b0 == 0.0 {
        return Err(Error::Numerical("zero risk-free bond price".into()));
    }
    Ok((s * bj / b0 - 1.0) / delta)
}
