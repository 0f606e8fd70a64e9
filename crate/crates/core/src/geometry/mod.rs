//! Numerical differential geometry on the discretized state space: model vector fields,
//! Lie brackets, span estimates, tangency of parameterized families and commutation tests.

mod discretization;
mod families;

pub use discretization::Discretization;
pub use families::{build_modified_ns_family, build_plain_ns_family, HwParams, ParamFamily, Strategy};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hjm::{DriftForm, VolatilitySpec};

/// A vector field on the flat discretized state space.
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Default relative step for nested bracket differences (exact for quadratic fields).
pub const BRACKET_STEP: f64 = 1e-2;
/// Relative singular-value threshold for span estimates.
pub const RANK_TOL: f64 = 1e-8;
/// Relative residual below which a family is declared consistent.
pub const CONSISTENT_TOL: f64 = 1e-6;
/// Relative residual above which a family is declared inconsistent.
pub const INCONSISTENT_TOL: f64 = 1e-4;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Stratonovich drift `μ̂` and volatilities `σ̂_i` of a model on a discretization.
#[derive(Clone)]
pub struct ModelFields {
    pub mu: VectorField,
    pub sigma: Vec<VectorField>,
}

impl ModelFields {
    pub fn new(spec: &VolatilitySpec, disc: &Discretization) -> Result<Self> {
        if spec.m() != disc.m {
            return Err(Error::Dimension("model and discretization disagree on m".into()));
        }
        let (m, d) = (spec.m(), spec.d());
        let nodes = disc.nodes.clone();
        let eval = |f: &crate::qe::QeFunction| nodes.iter().map(|&x| f.evaluate(x)).collect::<Vec<f64>>();
        let lam: Arc<Vec<Vec<Vec<f64>>>> = Arc::new(
            (0..=m)
                .map(|j| (0..d).map(|i| eval(spec.lambda(j, i))).collect())
                .collect(),
        );
        let dfn: Arc<Vec<Vec<Vec<f64>>>> = Arc::new(
            (0..=m)
                .map(|j| (0..d).map(|i| eval(&spec.d_function(j, i))).collect())
                .collect(),
        );
        let n = disc.n_nodes();
        let mu = {
            let (spec, disc, lam, dfn) = (spec.clone(), disc.clone(), lam.clone(), dfn.clone());
            Arc::new(move |flat: &[f64]| {
                let state = disc.to_state(flat);
                let c = spec
                    .drift_coefficients(&state, DriftForm::Stratonovich)
                    .expect("dimensions checked at construction");
                let mut out = vec![0.0; flat.len()];
                for j in 0..=m {
                    let r = DVector::from_column_slice(disc.curve(flat, j));
                    let fr = &disc.diff * r;
                    for k in 0..n {
                        let mut v = fr[k];
                        for i in 0..d {
                            v += c.d_weights[j][i] * dfn[j][i][k] + c.lambda_weights[j][i] * lam[j][i][k];
                        }
                        out[j * n + k] = v;
                    }
                }
                let b0 = disc.curve(flat, 0)[0];
                for j in 1..=m {
                    out[(m + 1) * n + j - 1] = b0 - disc.curve(flat, j)[0] + c.spread_terms[j - 1];
                }
                out
            }) as VectorField
        };
        let sigma = (0..d)
            .map(|i| {
                let (spec, disc, lam) = (spec.clone(), disc.clone(), lam.clone());
                Arc::new(move |flat: &[f64]| {
                    let l = spec.loadings(&disc.to_state(flat));
                    let mut out = vec![0.0; flat.len()];
                    for j in 0..=m {
                        for k in 0..n {
                            out[j * n + k] = l.phi[j][i] * lam[j][i][k];
                        }
                    }
                    for j in 1..=m {
                        out[(m + 1) * n + j - 1] = l.beta[j - 1][i];
                    }
                    out
                }) as VectorField
            })
            .collect();
        Ok(Self { mu, sigma })
    }

    /// `μ̂` followed by the `σ̂_i`.
    pub fn generators(&self) -> Vec<VectorField> {
        std::iter::once(self.mu.clone()).chain(self.sigma.iter().cloned()).collect()
    }
}

/// Directional derivative `∂v(r)·w` by a symmetric difference of size `fd_step·(1+‖r‖∞)`.
pub fn directional_derivative(v: &VectorField, r: &[f64], w: &[f64], fd_step: f64) -> Vec<f64> {
    let wn = sup(w);
    if wn == 0.0 {
        return vec![0.0; r.len()];
    }
    let s = fd_step * (1.0 + sup(r)) / wn;
    let up: Vec<f64> = r.iter().zip(w).map(|(a, b)| a + s * b).collect();
    let dn: Vec<f64> = r.iter().zip(w).map(|(a, b)| a - s * b).collect();
    v(&up).iter().zip(v(&dn)).map(|(a, b)| (a - b) / (2.0 * s)).collect()
}

/// `[v1, v2](r) = ∂v1(r) v2(r) − ∂v2(r) v1(r)`.
pub fn lie_bracket_numeric(v1: &VectorField, v2: &VectorField, r: &[f64], fd_step: f64) -> Vec<f64> {
    let a = directional_derivative(v1, r, &v2(r), fd_step);
    let b = directional_derivative(v2, r, &v1(r), fd_step);
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The bracket as a vector field (for nesting).
pub fn bracket_field(v1: &VectorField, v2: &VectorField, fd_step: f64) -> VectorField {
    let (a, b) = (v1.clone(), v2.clone());
    Arc::new(move |r: &[f64]| lie_bracket_numeric(&a, &b, r, fd_step))
}

/// Numerical rank of `fields` and their right-nested brackets up to `depth`, evaluated at `state`.
pub fn span_dimension_estimate(fields: &[VectorField], state: &[f64], depth: usize) -> Result<usize> {
    span_dimension_with_step(fields, state, depth, BRACKET_STEP)
}

pub fn span_dimension_with_step(fields: &[VectorField], state: &[f64], depth: usize, fd_step: f64) -> Result<usize> {
    if depth > 3 {
        return Err(Error::Input("bracket depth is capped at 3".into()));
    }
    let mut all: Vec<VectorField> = fields.to_vec();
    let mut level: Vec<VectorField> = fields.to_vec();
    for _ in 0..depth {
        let mut next = Vec::new();
        for (gi, g) in fields.iter().enumerate() {
            for (fi, f) in level.iter().enumerate() {
                if Arc::ptr_eq(g, f) && gi == fi {
                    continue;
                }
                next.push(bracket_field(g, f, fd_step));
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    let cols: Vec<Vec<f64>> = all.iter().map(|f| f(state)).collect();
    Ok(numerical_rank(&cols))
}

fn numerical_rank(cols: &[Vec<f64>]) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r]);
    let sv = m.singular_values();
    let mx = sv.max();
    if mx == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_TOL * mx).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconclusive,
    Inconsistent,
}

impl Verdict {
    fn from_residual(r: f64) -> Self {
        if r < CONSISTENT_TOL {
            Self::Consistent
        } else if r > INCONSISTENT_TOL {
            Self::Inconsistent
        } else {
            Self::Inconclusive
        }
    }

    fn worst(self, other: Self) -> Self {
        use Verdict::*;
        match (self, other) {
            (Inconsistent, _) | (_, Inconsistent) => Inconsistent,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangencyReport {
    pub drift_residual: f64,
    pub diffusion_residuals: Vec<f64>,
    pub verdict: Verdict,
}

impl TangencyReport {
    pub fn max_residual(&self) -> f64 {
        self.diffusion_residuals.iter().fold(self.drift_residual, |a, b| a.max(*b))
    }
}

/// Central-difference Jacobian of the sampled family at `z`.
pub fn family_jacobian(family: &ParamFamily, disc: &Discretization, z: &[f64]) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..family.param_dim)
        .map(|k| {
            let h = 1e-6 * (1.0 + z[k].abs());
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            up[k] += h;
            dn[k] -= h;
            let a = family.sample(disc, &up);
            let b = family.sample(disc, &dn);
            a.iter().zip(b).map(|(p, q)| (p - q) / (2.0 * h)).collect()
        })
        .collect();
    DMatrix::from_fn(disc.dim(), family.param_dim, |r, c| cols[c][r])
}

/// Relative least-squares residual of `target` against the column space of `jac`.
fn projection_residual(svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, target: &[f64]) -> f64 {
    let norm = l2(target);
    if norm == 0.0 {
        return 0.0;
    }
    let b = DVector::from_column_slice(target);
    let u = svd.u.as_ref().expect("u computed");
    let mx = svd.singular_values.max();
    let mut proj = DVector::zeros(b.len());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-12 * mx {
            let col = u.column(k);
            proj += col * col.dot(&b);
        }
    }
    (b - proj).norm() / norm
}

/// Tangency of the model fields to the family at `z`.
pub fn tangency_residual(
    family: &ParamFamily,
    spec: &VolatilitySpec,
    z: &[f64],
    disc: &Discretization,
) -> Result<TangencyReport> {
    let fields = ModelFields::new(spec, disc)?;
    tangency_residual_fields(family, &fields, z, disc)
}

pub fn tangency_residual_fields(
    family: &ParamFamily,
    fields: &ModelFields,
    z: &[f64],
    disc: &Discretization,
) -> Result<TangencyReport> {
    if z.len() != family.param_dim || family.m != disc.m {
        return Err(Error::Dimension("parameter point or discretization does not match the family".into()));
    }
    family.check_domain(z)?;
    let jac = family_jacobian(family, disc, z);
    let svd = jac.svd(true, false);
    let (mx, mn) = (svd.singular_values.max(), svd.singular_values.min());
    if !(mn > 1e-10 * mx) {
        return Err(Error::Domain(format!(
            "immersion condition violated: singular values {mn:.3e}/{mx:.3e}"
        )));
    }
    let g = family.sample(disc, z);
    let drift_residual = projection_residual(&svd, &(fields.mu)(&g));
    let diffusion_residuals: Vec<f64> = fields.sigma.iter().map(|s| projection_residual(&svd, &s(&g))).collect();
    let verdict = diffusion_residuals
        .iter()
        .fold(Verdict::from_residual(drift_residual), |v, r| v.worst(Verdict::from_residual(*r)));
    Ok(TangencyReport {
        drift_residual,
        diffusion_residuals,
        verdict,
    })
}

/// Outcome of the strategy-2 check and its perturbed control.
#[derive(Debug, Clone)]
pub struct Strategy2Report {
    pub beta: Vec<f64>,
    pub consistent_runs: Vec<TangencyReport>,
    pub control_runs: Vec<TangencyReport>,
    pub verdict: Verdict,
    pub control_verdict: Verdict,
}

/// Sets `β^j = σ^j/a^j − σ^0/a^0`, checks tangency of the strategy-2 family at `points`,
/// then repeats with every `β^j` increased by 10%.
pub fn verify_strategy2_consistency(
    a: &[f64],
    sigma: &[f64],
    points: &[Vec<f64>],
    disc: &Discretization,
) -> Result<Strategy2Report> {
    if a.len() != sigma.len() || a.is_empty() {
        return Err(Error::Dimension("need matching a and sigma".into()));
    }
    if a.iter().chain(sigma).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("a and sigma must be positive".into()));
    }
    let beta: Vec<f64> = (1..a.len()).map(|j| sigma[j] / a[j] - sigma[0] / a[0]).collect();
    let run = |beta: &[f64]| -> Result<(Vec<TangencyReport>, Verdict)> {
        let params = HwParams {
            a: a.to_vec(),
            sigma: sigma.to_vec(),
            beta: beta.to_vec(),
        };
        let family = build_modified_ns_family(&params, Strategy::Two);
        let spec: VolatilitySpec = crate::hjm::ConstantVolSpec::hull_white(a, sigma, beta)?.into();
        let fields = ModelFields::new(&spec, disc)?;
        let reports = points
            .iter()
            .map(|z| tangency_residual_fields(&family, &fields, z, disc))
            .collect::<Result<Vec<_>>>()?;
        let v = reports.iter().fold(Verdict::Consistent, |v, r| v.worst(r.verdict));
        Ok((reports, v))
    };
    let (consistent_runs, verdict) = run(&beta)?;
    let perturbed: Vec<f64> = beta.iter().map(|b| 1.1 * b).collect();
    let (control_runs, control_verdict) = run(&perturbed)?;
    Ok(Strategy2Report {
        beta,
        consistent_runs,
        control_runs,
        verdict,
        control_verdict,
    })
}

/// Per spread index `k`: whether `γ_k` commutes with `μ̂` and every `σ̂_i` at `state`.
pub fn commutation_check(
    spec: &VolatilitySpec,
    indices: &[usize],
    state: &[f64],
    disc: &Discretization,
) -> Result<Vec<(usize, bool, f64)>> {
    let fields = ModelFields::new(spec, disc)?;
    let m = disc.m;
    indices
        .iter()
        .map(|&k| {
            if k == 0 || k > m {
                return Err(Error::Dimension(format!("spread index {k} outside 1..={m}")));
            }
            let mut e = vec![0.0; disc.dim()];
            e[(m + 1) * disc.n_nodes() + k - 1] = 1.0;
            let gamma: VectorField = Arc::new(move |_r: &[f64]| e.clone());
            let mut worst = 0.0f64;
            for f in fields.generators() {
                let norm = l2(&f(state));
                if norm == 0.0 {
                    continue;
                }
                let br = lie_bracket_numeric(&f, &gamma, state, BRACKET_STEP);
                worst = worst.max(l2(&br) / norm);
            }
            Ok((k, worst < 1e-6, worst))
        })
        .collect()
}
