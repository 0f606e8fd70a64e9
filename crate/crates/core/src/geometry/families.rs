//! Parameterized families `G: Z → Ĥ` of forward curves and log-spreads.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::Discretization;

type FamilyMap = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type DomainCheck = Arc<dyn Fn(&[f64]) -> Result<()> + Send + Sync>;

/// `G(z, x)` returns the `m+1` curve values at `x` followed by the `m` log-spreads.
#[derive(Clone)]
pub struct ParamFamily {
    pub param_dim: usize,
    pub m: usize,
    map: FamilyMap,
    domain: DomainCheck,
}

impl fmt::Debug for ParamFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamFamily")
            .field("param_dim", &self.param_dim)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl ParamFamily {
    pub fn new(
        param_dim: usize,
        m: usize,
        map: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            param_dim,
            m,
            map: Arc::new(map),
            domain: Arc::new(|_| Ok(())),
        }
    }

    pub fn with_domain(mut self, check: impl Fn(&[f64]) -> Result<()> + Send + Sync + 'static) -> Self {
        self.domain = Arc::new(check);
        self
    }

    pub fn check_domain(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.param_dim {
            return Err(Error::Dimension(format!("expected {} parameters", self.param_dim)));
        }
        (self.domain)(z)
    }

    pub fn evaluate(&self, z: &[f64], x: f64) -> Vec<f64> {
        (self.map)(z, x)
    }

    /// `G(z)` in the flat layout of `disc`.
    pub fn sample(&self, disc: &Discretization, z: &[f64]) -> Vec<f64> {
        disc.sample(|x| self.evaluate(z, x))
    }
}

/// Hull–White rates, volatilities and spread loadings (`β` has length `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct HwParams {
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl HwParams {
    pub fn m(&self) -> usize {
        self.a.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Log-spreads appended as free parameters: dimension `5m + 4`.
    One,
    /// Log-spreads as functions of the curve parameters: dimension `4(m + 1)`.
    Two,
}

/// `z1 + z2 e^{-ax} + z3 x e^{-ax} + z4 e^{-2ax}`.
fn modified_ns(z: &[f64], a: f64, x: f64) -> f64 {
    let e = (-a * x).exp();
    z[0] + (z[1] + z[2] * x) * e + z[3] * e * e
}

/// Modified Nelson–Siegel family for the Hull–White model described by `params`.
pub fn build_modified_ns_family(params: &HwParams, strategy: Strategy) -> ParamFamily {
    let m = params.m();
    let a = params.a.clone();
    match strategy {
        Strategy::One => ParamFamily::new(5 * m + 4, m, move |z, x| {
            let mut out: Vec<f64> = (0..=m).map(|j| modified_ns(&z[4 * j..4 * j + 4], a[j], x)).collect();
            out.extend_from_slice(&z[4 * (m + 1)..]);
            out
        }),
        Strategy::Two => {
            let (s, b) = (params.sigma.clone(), params.beta.clone());
            ParamFamily::new(4 * (m + 1), m, move |z, x| {
                let mut out: Vec<f64> = (0..=m).map(|j| modified_ns(&z[4 * j..4 * j + 4], a[j], x)).collect();
                let z0 = &z[0..4];
                let (a0, s0) = (a[0], s[0]);
                for j in 1..=m {
                    let zj = &z[4 * j..4 * j + 4];
                    let (aj, sj, bj) = (a[j], s[j], b[j - 1]);
                    let g0 = (-z0[1] + (-z0[0] - s0 * s0 / (2.0 * a0 * a0) + 0.5 * bj * bj) * z0[2].ln()
                        - z0[2] / a0
                        - 0.5 * z0[3])
                        / a0;
                    let gj = (zj[1] + (zj[0] + sj * sj / (2.0 * aj * aj) - bj * sj / aj) * zj[2].ln()
                        + zj[2] / aj
                        + 0.5 * zj[3])
                        / aj;
                    out.push(g0 + gj);
                }
                out
            })
            .with_domain(move |z| {
                if (0..=m).any(|j| !(z[4 * j + 2] > 0.0)) {
                    Err(Error::Domain("third coordinate of every curve block must be positive".into()))
                } else {
                    Ok(())
                }
            })
        }
    }
}

/// Single-curve Nelson–Siegel `z1 + z2 e^{-ax} + z3 x e^{-ax}`.
pub fn build_plain_ns_family(a: f64) -> ParamFamily {
    ParamFamily::new(3, 0, move |z, x| {
        let e = (-a * x).exp();
        vec![z[0] + (z[1] + z[2] * x) * e]
    })
}
