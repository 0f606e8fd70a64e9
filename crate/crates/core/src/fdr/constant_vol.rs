//! Realizations of constant-volatility models.
//!
//! Layout `z = (z^0, z^0_1, …, z^{n_1}_1, …, z^0_d, …, z^{n_d}_d)` where `z^0` is time
//! and `n_i` is the degree of the minimal polynomial of `ν^1_i` under `F`.

use crate::curves::{ForwardCurve, MultiCurveState};
use crate::error::{Error, Result};
use crate::hjm::ConstantVolSpec;
use crate::qe::{AnnihilatorPoly, QeFunction, Root};

use super::Realization;

/// Data for one Brownian factor.
#[derive(Debug, Clone)]
pub struct FactorBlock {
    /// `n_i`.
    pub n: usize,
    /// Minimal polynomial `P_i` of `ν^1_i`.
    pub poly: AnnihilatorPoly,
    /// State drift coefficients `α̃^k` for `k = 1..=n_i` (`ν^{n+1} = Σ α̃^k ν^k`).
    pub alpha: Vec<f64>,
    /// `F^k σ^j_i` for `j = 0..=m`, `k = 0..=n_i`.
    pub curve_tangents: Vec<Vec<QeFunction>>,
    /// Spread loadings `c^j_k`: `β^j_i` for `k = 0`, `B F^{k−1}(σ^0_i − σ^j_i)` otherwise.
    pub spread_tangents: Vec<Vec<f64>>,
    offset: usize,
}

#[derive(Debug, Clone)]
pub struct ConstantVolFdr {
    spec: ConstantVolSpec,
    initial: Vec<QeFunction>,
    initial_integral: Vec<QeFunction>,
    y_m: Vec<f64>,
    blocks: Vec<FactorBlock>,
    s_fns: Vec<Vec<QeFunction>>,
    q_fns: Vec<QeFunction>,
    q_int: Vec<QeFunction>,
    s_int: Vec<Vec<QeFunction>>,
    n: usize,
}

fn negligible(f: &QeFunction, scale: f64) -> bool {
    f.terms()
        .iter()
        .flat_map(|t| t.cos_poly.iter().chain(&t.sin_poly))
        .all(|c| c.abs() <= 1e-11 * scale)
}

fn annihilates(p: &AnnihilatorPoly, sig: &[QeFunction], scale: f64) -> bool {
    let applied: Vec<QeFunction> = sig.iter().map(|s| p.apply(s)).collect();
    applied.iter().all(|f| negligible(&f.derive(), scale))
        && applied[1..]
            .iter()
            .all(|f| (applied[0].eval_at_zero() - f.eval_at_zero()).abs() <= 1e-11 * scale)
}

/// Minimal polynomial of `ν^1` obtained by greedy reduction of the least common multiple
/// of the annihilators of the `σ^j_i`.
fn minimal_poly(sig: &[QeFunction]) -> AnnihilatorPoly {
    let mut roots: Vec<Root> = Vec::new();
    for s in sig {
        for r in s.roots() {
            match roots
                .iter_mut()
                .find(|q| (q.rate - r.rate).abs() <= 1e-12 * r.rate.abs().max(1.0) && q.freq == r.freq)
            {
                Some(q) => q.multiplicity = q.multiplicity.max(r.multiplicity),
                None => roots.push(r),
            }
        }
    }
    let scale = sig
        .iter()
        .flat_map(|s| s.terms().iter().flat_map(|t| t.cos_poly.iter().chain(&t.sin_poly)))
        .fold(0.0f64, |a, c| a.max(c.abs()))
        .max(1e-300);
    loop {
        let mut reduced = false;
        for k in 0..roots.len() {
            if roots[k].multiplicity == 0 {
                continue;
            }
            roots[k].multiplicity -= 1;
            if annihilates(&AnnihilatorPoly::from_roots(&roots), sig, scale) {
                reduced = true;
            } else {
                roots[k].multiplicity += 1;
            }
        }
        if !reduced {
            break;
        }
    }
    roots.retain(|r| r.multiplicity > 0);
    AnnihilatorPoly::from_roots(&roots)
}

impl ConstantVolFdr {
    /// Builds the realization through the initial point `r̂^M_0`; curves must be analytic.
    pub fn new(spec: &ConstantVolSpec, initial: &MultiCurveState) -> Result<Self> {
        let (m, d) = (spec.m, spec.d);
        if initial.m() != m {
            return Err(Error::Dimension("initial state does not match the model".into()));
        }
        let init: Vec<QeFunction> = initial
            .curves
            .iter()
            .map(|c| match c {
                ForwardCurve::Analytic(f) => Ok(f.clone()),
                ForwardCurve::Sampled(_) => Err(Error::Input("initial curves must be analytic".into())),
            })
            .collect::<Result<_>>()?;
        let mut blocks = Vec::with_capacity(d);
        let mut offset = 1;
        for i in 0..d {
            let sig: Vec<QeFunction> = (0..=m).map(|j| spec.sigma[j][i].clone()).collect();
            let poly = minimal_poly(&sig);
            let n = poly.degree();
            let alpha = (1..=n).map(|k| -poly.coeffs[k - 1]).collect();
            let curve_tangents: Vec<Vec<QeFunction>> =
                sig.iter().map(|s| (0..=n).map(|k| s.derive_n(k)).collect()).collect();
            let spread_tangents = (1..=m)
                .map(|j| {
                    (0..=n)
                        .map(|k| {
                            if k == 0 {
                                spec.beta[j - 1][i]
                            } else {
                                curve_tangents[0][k - 1].eval_at_zero() - curve_tangents[j][k - 1].eval_at_zero()
                            }
                        })
                        .collect()
                })
                .collect();
            blocks.push(FactorBlock {
                n,
                poly,
                alpha,
                curve_tangents,
                spread_tangents,
                offset,
            });
            offset += n + 1;
        }
        let s_fns: Vec<Vec<QeFunction>> = (0..=m)
            .map(|j| (0..d).map(|i| spec.sigma[j][i].integrate_from_zero()).collect())
            .collect();
        let q_fns: Vec<QeFunction> = s_fns
            .iter()
            .map(|row| row.iter().fold(QeFunction::zero(), |acc, s| &acc + &(s * s)).scale(0.5))
            .collect();
        let q_int = q_fns.iter().map(|q| q.integrate_from_zero()).collect();
        let s_int = s_fns
            .iter()
            .map(|row| row.iter().map(|s| s.integrate_from_zero()).collect())
            .collect();
        Ok(Self {
            spec: spec.clone(),
            initial_integral: init.iter().map(|f| f.integrate_from_zero()).collect(),
            initial: init,
            y_m: initial.log_spreads.clone(),
            blocks,
            s_fns,
            q_fns,
            q_int,
            s_int,
            n: offset,
        })
    }

    pub fn blocks(&self) -> &[FactorBlock] {
        &self.blocks
    }

    /// Coordinate index of `z^k_i`.
    pub fn index(&self, i: usize, k: usize) -> usize {
        self.blocks[i].offset + k
    }
}

impl Realization for ConstantVolFdr {
    fn n(&self) -> usize {
        self.n
    }

    fn m(&self) -> usize {
        self.spec.m
    }

    fn d(&self) -> usize {
        self.spec.d
    }

    fn curve(&self, j: usize, z: &[f64], x: f64) -> f64 {
        let tau = z[0];
        let mut v = self.initial[j].evaluate(x + tau);
        for b in &self.blocks {
            for k in 0..=b.n {
                v += b.curve_tangents[j][k].evaluate(x) * z[b.offset + k];
            }
        }
        v += self.q_fns[j].evaluate(x + tau) - self.q_fns[j].evaluate(x);
        if j > 0 {
            for (i, s) in self.s_fns[j].iter().enumerate() {
                v -= self.spec.beta[j - 1][i] * (s.evaluate(x + tau) - s.evaluate(x));
            }
        }
        v
    }

    fn log_spread(&self, j: usize, z: &[f64]) -> f64 {
        let tau = z[0];
        let beta = &self.spec.beta[j - 1];
        let mut v = self.y_m[j - 1] + self.initial_integral[0].evaluate(tau) - self.initial_integral[j].evaluate(tau);
        for b in &self.blocks {
            for k in 0..=b.n {
                v += b.spread_tangents[j - 1][k] * z[b.offset + k];
            }
        }
        v += self.q_int[0].evaluate(tau) - self.q_int[j].evaluate(tau);
        for (i, s) in self.s_int[j].iter().enumerate() {
            v += beta[i] * s.evaluate(tau);
        }
        v - 0.5 * beta.iter().map(|b| b * b).sum::<f64>() * tau
    }

    fn drift(&self, z: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.n];
        a[0] = 1.0;
        for b in &self.blocks {
            let last = z[b.offset + b.n];
            for k in 1..=b.n {
                a[b.offset + k] = z[b.offset + k - 1] + last * b.alpha[k - 1];
            }
        }
        a
    }

    fn diffusion(&self, _z: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.spec.d]; self.n];
        for (i, b) in self.blocks.iter().enumerate() {
            out[b.offset][i] = 1.0;
        }
        out
    }

    fn tangent(&self, z: &[f64], k: usize, x: f64) -> Vec<f64> {
        if k == 0 {
            let h = 1e-6 * (1.0 + z[0].abs());
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            up[0] += h;
            dn[0] -= h;
            return self
                .embed(&up, x)
                .into_iter()
                .zip(self.embed(&dn, x))
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
        }
        let b = self.blocks.iter().find(|b| k >= b.offset && k <= b.offset + b.n).unwrap();
        let kk = k - b.offset;
        let m = self.spec.m;
        (0..=m)
            .map(|j| b.curve_tangents[j][kk].evaluate(x))
            .chain((1..=m).map(|j| b.spread_tangents[j - 1][kk]))
            .collect()
    }
}
