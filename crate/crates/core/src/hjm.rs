//! Volatility specifications, risk-neutral drifts and Euler–Maruyama simulation
//! of the grid-discretized multi-curve dynamics.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::curves::{ForwardCurve, MultiCurveState, SampledCurve};
use crate::error::{Error, Result};
use crate::qe::QeFunction;
use crate::rng::brownian_increments;

type StateFn = dyn Fn(&MultiCurveState) -> f64 + Send + Sync;

/// Scalar field on the state space (the `φ^j_i`, `β^j_i` of a constant-direction model).
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `c0 + c1·Y^k` with `k` in `1..=m`.
    Affine { c0: f64, c1: f64, k: usize },
    Custom(Arc<StateFn>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Affine { c0, c1, k } => write!(f, "Affine({c0} + {c1}·Y{k})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl ScalarField {
    pub fn evaluate(&self, state: &MultiCurveState) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Affine { c0, c1, k } => c0 + c1 * state.log_spreads[k - 1],
            Self::Custom(f) => f(state),
        }
    }

    /// Fields whose value can change along a path.
    pub fn is_state_dependent(&self) -> bool {
        match self {
            Self::Constant(_) => false,
            Self::Affine { c1, .. } => *c1 != 0.0,
            Self::Custom(_) => true,
        }
    }

    /// Fréchet derivative at `state` applied to the direction `(curves, spreads)`.
    pub fn directional_derivative(
        &self,
        state: &MultiCurveState,
        curves: &[QeFunction],
        spreads: &[f64],
    ) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Affine { c1, k, .. } => c1 * spreads[k - 1],
            Self::Custom(f) => {
                let h = 1e-6 * (1.0 + state.sup_norm());
                let up = state.perturbed(h, curves, spreads);
                let dn = state.perturbed(-h, curves, spreads);
                (f(&up) - f(&dn)) / (2.0 * h)
            }
        }
    }
}

/// Constant volatility: `σ̂_i = (σ^0_i, …, σ^m_i, β^1_i, …, β^m_i)`.
#[derive(Debug, Clone)]
pub struct ConstantVolSpec {
    pub m: usize,
    pub d: usize,
    pub sigma: Vec<Vec<QeFunction>>,
    pub beta: Vec<Vec<f64>>,
}

impl ConstantVolSpec {
    pub fn new(sigma: Vec<Vec<QeFunction>>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let m = beta.len();
        if sigma.len() != m + 1 {
            return Err(Error::Dimension(format!("sigma needs {} rows", m + 1)));
        }
        let d = sigma[0].len();
        if sigma.iter().any(|r| r.len() != d) || beta.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("every row must have d factors".into()));
        }
        Ok(Self { m, d, sigma, beta })
    }

    /// Three-curve Hull–White volatility with one factor.
    pub fn hull_white(a: &[f64], sigma: &[f64], beta: &[f64]) -> Result<Self> {
        if a.len() != sigma.len() || beta.len() + 1 != a.len() {
            return Err(Error::Dimension("need m+1 rates and vols, m spread vols".into()));
        }
        Self::new(
            a.iter().zip(sigma).map(|(&a, &s)| vec![QeFunction::exp(s, -a)]).collect(),
            beta.iter().map(|&b| vec![b]).collect(),
        )
    }
}

/// Constant direction volatility `σ̂_i(r̂) = (φ^j_i(r̂)λ^j_i, β^j_i(r̂))`.
#[derive(Debug, Clone)]
pub struct ConstantDirectionVolSpec {
    pub m: usize,
    pub d: usize,
    pub lambda: Vec<Vec<QeFunction>>,
    pub phi: Vec<Vec<ScalarField>>,
    pub beta: Vec<Vec<ScalarField>>,
}

impl ConstantDirectionVolSpec {
    pub fn new(
        lambda: Vec<Vec<QeFunction>>,
        phi: Vec<Vec<ScalarField>>,
        beta: Vec<Vec<ScalarField>>,
    ) -> Result<Self> {
        let m = beta.len();
        if lambda.len() != m + 1 || phi.len() != m + 1 {
            return Err(Error::Dimension(format!("lambda and phi need {} rows", m + 1)));
        }
        let d = lambda[0].len();
        let bad = lambda.iter().any(|r| r.len() != d)
            || phi.iter().any(|r| r.len() != d)
            || beta.iter().any(|r| r.len() != d);
        if bad {
            return Err(Error::Dimension("every row must have d factors".into()));
        }
        for row in phi.iter().chain(&beta) {
            for f in row {
                if let ScalarField::Affine { k, .. } = f {
                    if *k == 0 || *k > m {
                        return Err(Error::Dimension(format!("log-spread index {k} outside 1..={m}")));
                    }
                }
            }
        }
        Ok(Self { m, d, lambda, phi, beta })
    }
}

#[derive(Debug, Clone)]
pub enum VolatilitySpec {
    ConstantVol(ConstantVolSpec),
    ConstantDirection(ConstantDirectionVolSpec),
}

/// Which drift form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftForm {
    Ito,
    Stratonovich,
}

/// Drift written as `F r^j + Σ_i dw[j][i] D^j_i + Σ_i lw[j][i] λ^j_i` for the curves and
/// `B r^0 − B r^j + spread_terms[j−1]` for the log-spreads.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCoefficients {
    pub d_weights: Vec<Vec<f64>>,
    pub lambda_weights: Vec<Vec<f64>>,
    pub spread_terms: Vec<f64>,
}

/// Drift of every component of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub curves: Vec<ForwardCurve>,
    pub spreads: Vec<f64>,
}

/// Model loadings at a state: `φ` ((m+1)×d) and `β` (m×d).
#[derive(Debug, Clone, PartialEq)]
pub struct Loadings {
    pub phi: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl From<ConstantVolSpec> for VolatilitySpec {
    fn from(s: ConstantVolSpec) -> Self {
        Self::ConstantVol(s)
    }
}

impl From<ConstantDirectionVolSpec> for VolatilitySpec {
    fn from(s: ConstantDirectionVolSpec) -> Self {
        Self::ConstantDirection(s)
    }
}

impl VolatilitySpec {
    pub fn m(&self) -> usize {
        match self {
            Self::ConstantVol(s) => s.m,
            Self::ConstantDirection(s) => s.m,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Self::ConstantVol(s) => s.d,
            Self::ConstantDirection(s) => s.d,
        }
    }

    /// Direction `λ^j_i` (equal to `σ^j_i` for constant volatility).
    pub fn lambda(&self, j: usize, i: usize) -> &QeFunction {
        match self {
            Self::ConstantVol(s) => &s.sigma[j][i],
            Self::ConstantDirection(s) => &s.lambda[j][i],
        }
    }

    /// `D^j_i = λ^j_i · Hλ^j_i`.
    pub fn d_function(&self, j: usize, i: usize) -> QeFunction {
        let l = self.lambda(j, i);
        l * &l.integrate_from_zero()
    }

    pub fn loadings(&self, state: &MultiCurveState) -> Loadings {
        match self {
            Self::ConstantVol(s) => Loadings {
                phi: vec![vec![1.0; s.d]; s.m + 1],
                beta: s.beta.clone(),
            },
            Self::ConstantDirection(s) => Loadings {
                phi: s
                    .phi
                    .iter()
                    .map(|r| r.iter().map(|f| f.evaluate(state)).collect())
                    .collect(),
                beta: s
                    .beta
                    .iter()
                    .map(|r| r.iter().map(|f| f.evaluate(state)).collect())
                    .collect(),
            },
        }
    }

    /// Runtime check that state-dependent loadings do not vanish.
    pub fn check_nonzero(&self, state: &MultiCurveState) -> Result<()> {
        if let Self::ConstantDirection(s) = self {
            for (name, rows) in [("phi", &s.phi), ("beta", &s.beta)] {
                for (j, row) in rows.iter().enumerate() {
                    for (i, f) in row.iter().enumerate() {
                        if f.is_state_dependent() && f.evaluate(state) == 0.0 {
                            return Err(Error::Domain(format!(
                                "non-zero condition violated: {name}[{j}][{i}] vanishes"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dims(&self, state: &MultiCurveState) -> Result<()> {
        if state.m() != self.m() {
            return Err(Error::Dimension(format!(
                "state has {} spreads, model has {}",
                state.m(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Volatility vector of factor `i` at `state`: curve directions and spread loadings.
    pub fn factor(&self, state: &MultiCurveState, i: usize) -> (Vec<QeFunction>, Vec<f64>) {
        let l = self.loadings(state);
        let curves = (0..=self.m()).map(|j| self.lambda(j, i).scale(l.phi[j][i])).collect();
        let spreads = (0..self.m()).map(|j| l.beta[j][i]).collect();
        (curves, spreads)
    }

    pub fn drift_coefficients(&self, state: &MultiCurveState, form: DriftForm) -> Result<DriftCoefficients> {
        self.check_dims(state)?;
        let (m, d) = (self.m(), self.d());
        let l = self.loadings(state);
        let mut dw = vec![vec![0.0; d]; m + 1];
        let mut lw = vec![vec![0.0; d]; m + 1];
        let mut st = vec![0.0; m];
        for j in 0..=m {
            for i in 0..d {
                dw[j][i] = l.phi[j][i] * l.phi[j][i];
                if j > 0 {
                    lw[j][i] = -l.beta[j - 1][i] * l.phi[j][i];
                }
            }
        }
        for j in 0..m {
            st[j] = -0.5 * l.beta[j].iter().map(|b| b * b).sum::<f64>();
        }
        if let (DriftForm::Stratonovich, Self::ConstantDirection(s)) = (form, self) {
            for i in 0..d {
                let (vc, vs) = self.factor(state, i);
                for j in 0..=m {
                    lw[j][i] -= 0.5 * s.phi[j][i].directional_derivative(state, &vc, &vs);
                }
                for j in 0..m {
                    st[j] -= 0.5 * s.beta[j][i].directional_derivative(state, &vc, &vs);
                }
            }
        }
        Ok(DriftCoefficients {
            d_weights: dw,
            lambda_weights: lw,
            spread_terms: st,
        })
    }

    fn assemble(&self, state: &MultiCurveState, c: &DriftCoefficients) -> Drift {
        let (m, d) = (self.m(), self.d());
        let curves = (0..=m)
            .map(|j| {
                let mut extra = QeFunction::zero();
                for i in 0..d {
                    extra = &extra + &self.d_function(j, i).scale(c.d_weights[j][i]);
                    extra = &extra + &self.lambda(j, i).scale(c.lambda_weights[j][i]);
                }
                match &state.curves[j] {
                    ForwardCurve::Analytic(f) => ForwardCurve::Analytic(&f.derive() + &extra),
                    ForwardCurve::Sampled(s) => {
                        let fr = s.derivative();
                        ForwardCurve::Sampled(SampledCurve {
                            grid: s.grid.clone(),
                            values: s.grid.iter().zip(fr).map(|(&x, v)| v + extra.evaluate(x)).collect(),
                        })
                    }
                }
            })
            .collect();
        let b0 = state.curves[0].short_rate();
        let spreads = (1..=m)
            .map(|j| b0 - state.curves[j].short_rate() + c.spread_terms[j - 1])
            .collect();
        Drift { curves, spreads }
    }

    /// Risk-neutral Itô drift `α^j = F r^j + σ^j·Hσ^j − β^j·σ^j`, `γ^j = B r^0 − B r^j − ½‖β^j‖²`.
    pub fn ito_drift(&self, state: &MultiCurveState) -> Result<Drift> {
        let c = self.drift_coefficients(state, DriftForm::Ito)?;
        Ok(self.assemble(state, &c))
    }

    /// Stratonovich drift `μ̂ = μ − ½ ∂σ̂·σ̂`.
    pub fn stratonovich_drift(&self, state: &MultiCurveState) -> Result<Drift> {
        let c = self.drift_coefficients(state, DriftForm::Stratonovich)?;
        Ok(self.assemble(state, &c))
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub grid: Arc<Vec<f64>>,
    /// Store the state every `record_every` steps (0: only the endpoints).
    pub record_every: usize,
    /// Constant added to every forward-rate drift (diagnostic perturbation).
    pub drift_bias: f64,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64, grid: Vec<f64>) -> Self {
        Self {
            dt,
            horizon,
            n_paths,
            seed,
            grid: Arc::new(grid),
            record_every: 0,
            drift_bias: 0.0,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || self.n_paths == 0 {
            return Err(Error::Input("dt, horizon and n_paths must be positive".into()));
        }
        let r = self.horizon / self.dt;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::Input("horizon must be an integer multiple of dt".into()));
        }
        Ok(r.round() as usize)
    }

    fn records(&self, step: usize, steps: usize) -> bool {
        step == 0 || step == steps || (self.record_every > 0 && step % self.record_every == 0)
    }
}

/// One simulated path sampled at the recorded times.
#[derive(Debug, Clone)]
pub struct HjmPath {
    pub times: Vec<f64>,
    pub states: Vec<MultiCurveState>,
    /// `log S^0_t = ∫_0^t r_s(0) ds` (trapezoid in time).
    pub log_numeraire: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PathSet {
    pub paths: Vec<HjmPath>,
}

/// Simulates `cfg.n_paths` independent paths; path `p` uses the Brownian stream `p` of `cfg.seed`.
pub fn simulate_hjm(initial: &MultiCurveState, spec: &VolatilitySpec, cfg: &SimConfig) -> Result<PathSet> {
    let steps = cfg.steps()?;
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = brownian_increments(cfg.seed, p as u64, steps, spec.d(), cfg.dt);
            simulate_hjm_path(initial, spec, cfg, &inc)
                .map_err(|e| Error::Numerical(format!("path {p}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathSet { paths })
}

/// Euler–Maruyama path driven by the supplied increments (`steps × d`).
pub fn simulate_hjm_path(
    initial: &MultiCurveState,
    spec: &VolatilitySpec,
    cfg: &SimConfig,
    increments: &[Vec<f64>],
) -> Result<HjmPath> {
    let steps = cfg.steps()?;
    let (m, d) = (spec.m(), spec.d());
    if initial.m() != m {
        return Err(Error::Dimension("initial state does not match the model".into()));
    }
    if increments.len() != steps || increments.iter().any(|w| w.len() != d) {
        return Err(Error::Dimension(format!("need {steps}×{d} Brownian increments")));
    }
    let grid = &cfg.grid;
    let n = grid.len();
    let lam: Vec<Vec<Vec<f64>>> = (0..=m)
        .map(|j| (0..d).map(|i| grid.iter().map(|&x| spec.lambda(j, i).evaluate(x)).collect()).collect())
        .collect();
    let dfn: Vec<Vec<Vec<f64>>> = (0..=m)
        .map(|j| {
            (0..d)
                .map(|i| {
                    let f = spec.d_function(j, i);
                    grid.iter().map(|&x| f.evaluate(x)).collect()
                })
                .collect()
        })
        .collect();
    let curves = initial
        .curves
        .iter()
        .map(|c| c.sample(grid).map(ForwardCurve::Sampled))
        .collect::<Result<Vec<_>>>()?;
    let mut state = MultiCurveState::new(curves, initial.log_spreads.clone())?;
    let mut path = HjmPath {
        times: vec![0.0],
        states: vec![state.clone()],
        log_numeraire: vec![0.0],
    };
    let mut log_num = 0.0;
    let mut t = 0.0;
    let mut fr = vec![0.0; n];
    for (step, dw) in increments.iter().enumerate() {
        spec.check_nonzero(&state)?;
        let l = spec.loadings(&state);
        let short_old: Vec<f64> = (0..=m).map(|j| state.curves[j].short_rate()).collect();
        let mut new_curves = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let ForwardCurve::Sampled(s) = &state.curves[j] else {
                unreachable!("simulation state is sampled")
            };
            let v = &s.values;
            for k in 0..n - 1 {
                fr[k] = (v[k + 1] - v[k]) / (grid[k + 1] - grid[k]);
            }
            fr[n - 1] = 0.0;
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let mut drift = fr[k] + cfg.drift_bias;
                let mut diff = 0.0;
                for i in 0..d {
                    let phi = l.phi[j][i];
                    drift += phi * phi * dfn[j][i][k];
                    if j > 0 {
                        drift -= l.beta[j - 1][i] * phi * lam[j][i][k];
                    }
                    diff += phi * lam[j][i][k] * dw[i];
                }
                out.push(v[k] + drift * cfg.dt + diff);
            }
            new_curves.push(out);
        }
        for (c, vals) in state.curves.iter_mut().zip(new_curves) {
            if let ForwardCurve::Sampled(s) = c {
                s.values = vals;
            }
        }
        let short_new: Vec<f64> = (0..=m).map(|j| state.curves[j].short_rate()).collect();
        // Short-rate differentials use the same trapezoid as the numeraire, so pure transport is exact.
        for j in 1..=m {
            let b = &l.beta[j - 1];
            let carry = 0.5 * (short_old[0] + short_new[0] - short_old[j] - short_new[j]);
            let drift = carry - 0.5 * b.iter().map(|x| x * x).sum::<f64>();
            let diff: f64 = b.iter().zip(dw).map(|(b, w)| b * w).sum();
            state.log_spreads[j - 1] += drift * cfg.dt + diff;
        }
        let bad = state
            .curves
            .iter()
            .any(|c| matches!(c, ForwardCurve::Sampled(s) if s.values.iter().any(|v| !v.is_finite())))
            || state.log_spreads.iter().any(|v| !v.is_finite());
        if bad {
            return Err(Error::Numerical(format!("non-finite state at step {}", step + 1)));
        }
        log_num += 0.5 * (short_old[0] + short_new[0]) * cfg.dt;
        t += cfg.dt;
        if cfg.records(step + 1, steps) {
            path.times.push(t);
            path.states.push(state.clone());
            path.log_numeraire.push(log_num);
        }
    }
    Ok(path)
}

/// Result of a martingale test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleStat {
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
    pub reference: f64,
}

/// Tests `E[B^0_t(T)/S^0_t] = B^0_0(T)` (`j = 0`) or `E[S^j_t B^j_t(T)/S^0_t] = S^j_0 B^j_0(T)`.
pub fn martingale_check(paths: &PathSet, j: usize, t: f64, maturity: f64) -> Result<MartingaleStat> {
    let n = paths.paths.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!("{n} paths, need at least 100")));
    }
    if !(t >= 0.0 && maturity >= t) {
        return Err(Error::Domain("need 0 ≤ t ≤ T".into()));
    }
    let discounted = |st: &MultiCurveState, log_num: f64, tau: f64| -> Result<f64> {
        if j > st.m() {
            return Err(Error::Dimension(format!("curve index {j} outside 0..={}", st.m())));
        }
        let spread = if j == 0 { 0.0 } else { st.log_spreads[j - 1] };
        Ok((spread - log_num - st.curves[j].integral(tau)?).exp())
    };
    let first = &paths.paths[0];
    let reference = discounted(&first.states[0], 0.0, maturity)?;
    let values = paths
        .paths
        .iter()
        .map(|p| {
            let k = p
                .times
                .iter()
                .position(|&s| (s - t).abs() <= 1e-9 * t.max(1.0))
                .ok_or_else(|| Error::Domain(format!("time {t} was not recorded")))?;
            discounted(&p.states[k], p.log_numeraire[k], maturity - t)
        })
        .collect::<Result<Vec<f64>>>()?;
    // Shifted by the first sample so that identical samples give an exact mean and zero variance.
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let stderr = (var / n as f64).sqrt();
    let dev = mean - reference;
    let z = if stderr > 0.0 {
        dev / stderr
    } else if dev.abs() <= 1e-12 * reference.abs() {
        0.0
    } else {
        dev.signum() * f64::INFINITY
    };
    Ok(MartingaleStat {
        mean,
        stderr,
        z,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::nelson_siegel;
    use approx::assert_relative_eq;

    fn ns_state() -> MultiCurveState {
        MultiCurveState::new(
            vec![
                ForwardCurve::Analytic(nelson_siegel([0.02, -0.01, 0.005], 0.5)),
                ForwardCurve::Analytic(nelson_siegel([0.025, -0.01, 0.004], 0.6)),
                ForwardCurve::Analytic(nelson_siegel([0.03, -0.012, 0.003], 0.7)),
            ],
            vec![0.001, 0.002],
        )
        .unwrap()
    }

    fn hw() -> VolatilitySpec {
        ConstantVolSpec::hull_white(&[0.5, 0.6, 0.7], &[0.01, 0.012, 0.014], &[0.2, 0.3])
            .unwrap()
            .into()
    }

    #[test]
    fn hull_white_drift_formula() {
        let st = ns_state();
        let drift = hw().ito_drift(&st).unwrap();
        let (a, s, b) = (0.6, 0.012, 0.2);
        for x in [0.0, 0.5, 3.0] {
            let fr = st.curves[1].value(x + 1e-6) - st.curves[1].value(x - 1e-6);
            let expected = fr / 2e-6 + s * s / a * (-a * x).exp() * (1.0 - (-a * x).exp()) - b * s * (-a * x).exp();
            assert_relative_eq!(drift.curves[1].value(x), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_volatility_drift() {
        let st = ns_state();
        let spec: VolatilitySpec = ConstantVolSpec::hull_white(&[0.5, 0.6, 0.7], &[0.0; 3], &[0.0, 0.0])
            .unwrap()
            .into();
        let drift = spec.ito_drift(&st).unwrap();
        for j in 0..3 {
            let ForwardCurve::Analytic(f) = &st.curves[j] else { panic!() };
            let ForwardCurve::Analytic(g) = &drift.curves[j] else { panic!() };
            assert!(g.approx_eq(&f.derive(), 1e-15));
        }
        assert_eq!(drift.spreads[0], st.curves[0].short_rate() - st.curves[1].short_rate());
    }

    #[test]
    fn cdv_example_correction_matches_hand_expansion() {
        // β^1_2 = b·Y^1: ζ^1 = ½(β^1_1)² + ½ b² Y(Y+1)
        let (b11, b12) = (0.3, 0.4);
        let lambda = vec![
            vec![QeFunction::exp(0.01, -0.5), QeFunction::zero()],
            vec![QeFunction::zero(), QeFunction::exp(0.02, -0.6)],
        ];
        let phi = vec![
            vec![ScalarField::Constant(1.0), ScalarField::Constant(1.0)],
            vec![ScalarField::Constant(1.0), ScalarField::Constant(1.0)],
        ];
        let beta = vec![vec![ScalarField::Constant(b11), ScalarField::Affine { c0: 0.0, c1: b12, k: 1 }]];
        let spec: VolatilitySpec = ConstantDirectionVolSpec::new(lambda, phi, beta).unwrap().into();
        let st = MultiCurveState::new(
            vec![ForwardCurve::flat(0.01), ForwardCurve::flat(0.015)],
            vec![0.05],
        )
        .unwrap();
        let drift = spec.stratonovich_drift(&st).unwrap();
        let y = 0.05;
        let zeta = 0.5 * b11 * b11 + 0.5 * b12 * b12 * y * (y + 1.0);
        assert_relative_eq!(drift.spreads[0], 0.01 - 0.015 - zeta, epsilon = 1e-15);
        let ito = spec.ito_drift(&st).unwrap();
        assert_relative_eq!(ito.spreads[0], 0.01 - 0.015 - 0.5 * (b11 * b11 + b12 * b12 * y * y), epsilon = 1e-15);
    }

    #[test]
    fn custom_field_uses_finite_differences() {
        let lambda = vec![vec![QeFunction::exp(0.01, -0.5)], vec![QeFunction::exp(0.02, -0.6)]];
        let phi = vec![vec![ScalarField::Constant(1.0)], vec![ScalarField::Constant(1.0)]];
        let affine = vec![vec![ScalarField::Affine { c0: 0.1, c1: 0.4, k: 1 }]];
        let custom = vec![vec![ScalarField::Custom(Arc::new(|s: &MultiCurveState| 0.1 + 0.4 * s.log_spreads[0]))]];
        let st = MultiCurveState::new(vec![ForwardCurve::flat(0.01), ForwardCurve::flat(0.02)], vec![0.3]).unwrap();
        let a: VolatilitySpec = ConstantDirectionVolSpec::new(lambda.clone(), phi.clone(), affine).unwrap().into();
        let c: VolatilitySpec = ConstantDirectionVolSpec::new(lambda, phi, custom).unwrap().into();
        let da = a.stratonovich_drift(&st).unwrap();
        let dc = c.stratonovich_drift(&st).unwrap();
        assert_relative_eq!(da.spreads[0], dc.spreads[0], epsilon = 1e-9);
    }

    #[test]
    fn nonzero_condition_is_enforced() {
        let lambda = vec![vec![QeFunction::exp(0.01, -0.5)], vec![QeFunction::exp(0.02, -0.6)]];
        let phi = vec![vec![ScalarField::Constant(1.0)], vec![ScalarField::Constant(1.0)]];
        let beta = vec![vec![ScalarField::Affine { c0: 0.0, c1: 0.4, k: 1 }]];
        let spec: VolatilitySpec = ConstantDirectionVolSpec::new(lambda, phi, beta).unwrap().into();
        let st = MultiCurveState::new(vec![ForwardCurve::flat(0.01), ForwardCurve::flat(0.02)], vec![0.0]).unwrap();
        assert!(spec.check_nonzero(&st).is_err());
        let cfg = SimConfig::new(0.01, 0.02, 1, 1, crate::curves::uniform_grid(1.0, 0.01));
        let inc = vec![vec![0.0]; 2];
        assert!(simulate_hjm_path(&st, &spec, &cfg, &inc).is_err());
    }

    #[test]
    fn zero_vol_transport_is_exact_on_nodes() {
        let spec: VolatilitySpec = ConstantVolSpec::hull_white(&[0.5, 0.6, 0.7], &[0.0; 3], &[0.0, 0.0])
            .unwrap()
            .into();
        let grid = crate::curves::uniform_grid(3.0, 0.01);
        let cfg = SimConfig::new(0.01, 1.0, 1, 3, grid.clone());
        let inc = vec![vec![0.0]; 100];
        let p = simulate_hjm_path(&ns_state(), &spec, &cfg, &inc).unwrap();
        let last = p.states.last().unwrap();
        for (k, x) in grid.iter().enumerate().take(200) {
            assert_relative_eq!(last.curves[0].value(*x), ns_state().curves[0].value(grid[k + 100]), epsilon = 1e-15);
        }
    }

    #[test]
    fn sim_config_validation() {
        let cfg = SimConfig::new(0.3, 1.0, 1, 0, vec![0.0, 1.0]);
        assert!(cfg.steps().is_err());
        assert_eq!(SimConfig::new(0.25, 1.0, 1, 0, vec![0.0, 1.0]).steps().unwrap(), 4);
    }
}
