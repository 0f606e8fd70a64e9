//! Twelve-dimensional realization of the two-tenor, three-factor Hull–White model whose
//! spread volatilities are proportional to the log-spreads:
//! `σ̂ = diag(σ^j e^{-a^j x})` on the curves, `(β^1_1, β^1_2 Y^1, 0)` and
//! `(β^2_1, 0, β^2_3 Y^2)` on the log-spreads.
//!
//! State `z = (x^0, x^1, x^2, z^0, z^1, z^2, X^0_0, X^0_1, X^1_0, X^1_1, X^2_0, X^2_1)`.

use crate::curves::{ForwardCurve, MultiCurveState};
use crate::error::{Error, Result};
use crate::hjm::{ConstantDirectionVolSpec, ScalarField};
use crate::qe::QeFunction;

use super::Realization;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdvParams {
    pub sigma: [f64; 3],
    pub a: [f64; 3],
    pub beta11: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub beta23: f64,
}

impl CdvParams {
    pub fn spec(&self) -> ConstantDirectionVolSpec {
        let lambda = (0..3)
            .map(|j| {
                (0..3)
                    .map(|i| {
                        if i == j {
                            QeFunction::exp(self.sigma[j], -self.a[j])
                        } else {
                            QeFunction::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let one = || vec![ScalarField::Constant(1.0); 3];
        let beta = vec![
            vec![
                ScalarField::Constant(self.beta11),
                ScalarField::Affine { c0: 0.0, c1: self.beta12, k: 1 },
                ScalarField::Constant(0.0),
            ],
            vec![
                ScalarField::Constant(self.beta21),
                ScalarField::Constant(0.0),
                ScalarField::Affine { c0: 0.0, c1: self.beta23, k: 2 },
            ],
        ];
        ConstantDirectionVolSpec::new(lambda, vec![one(), one(), one()], beta).expect("fixed dimensions")
    }
}

#[derive(Debug, Clone)]
pub struct CdvExampleFdr {
    pub params: CdvParams,
    initial: Vec<QeFunction>,
    initial_integral: Vec<QeFunction>,
    y_m: [f64; 2],
    lambda: Vec<QeFunction>,
    dfn: Vec<QeFunction>,
    fdfn: Vec<QeFunction>,
}

impl CdvExampleFdr {
    pub fn new(params: CdvParams, initial: &MultiCurveState) -> Result<Self> {
        if initial.m() != 2 {
            return Err(Error::Dimension("the example has two tenors".into()));
        }
        if initial.log_spreads.iter().any(|y| *y == 0.0) {
            return Err(Error::Domain("initial log-spreads must be non-zero".into()));
        }
        if params.a.iter().chain(&params.sigma).any(|v| !(*v > 0.0)) {
            return Err(Error::Input("mean reversions and volatilities must be positive".into()));
        }
        let init: Vec<QeFunction> = initial
            .curves
            .iter()
            .map(|c| match c {
                ForwardCurve::Analytic(f) => Ok(f.clone()),
                ForwardCurve::Sampled(_) => Err(Error::Input("initial curves must be analytic".into())),
            })
            .collect::<Result<_>>()?;
        let lambda: Vec<QeFunction> = (0..3).map(|j| QeFunction::exp(params.sigma[j], -params.a[j])).collect();
        let dfn: Vec<QeFunction> = lambda.iter().map(|l| l * &l.integrate_from_zero()).collect();
        Ok(Self {
            params,
            initial_integral: init.iter().map(|f| f.integrate_from_zero()).collect(),
            initial: init,
            y_m: [initial.log_spreads[0], initial.log_spreads[1]],
            fdfn: dfn.iter().map(|d| d.derive()).collect(),
            dfn,
            lambda,
        })
    }

    /// Log-spread `Y^j` reconstructed from the state.
    fn spread(&self, j: usize, z: &[f64]) -> f64 {
        self.y_m[j - 1] + self.initial_integral[0].evaluate(z[0]) - self.initial_integral[j].evaluate(z[0]) + z[j]
    }
}

impl Realization for CdvExampleFdr {
    fn n(&self) -> usize {
        12
    }

    fn m(&self) -> usize {
        2
    }

    fn d(&self) -> usize {
        3
    }

    fn curve(&self, j: usize, z: &[f64], x: f64) -> f64 {
        self.initial[j].evaluate(x + z[0])
            + z[3 + j] * self.lambda[j].evaluate(x)
            + z[6 + 2 * j] * self.dfn[j].evaluate(x)
            + z[7 + 2 * j] * self.fdfn[j].evaluate(x)
    }

    fn log_spread(&self, j: usize, z: &[f64]) -> f64 {
        self.spread(j, z)
    }

    fn drift(&self, z: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let (s, a) = (p.sigma, p.a);
        let y1 = self.spread(1, z);
        let y2 = self.spread(2, z);
        let short0 = z[3] * s[0] + s[0] * s[0] * z[7];
        vec![
            1.0,
            short0 - z[4] * s[1] - s[1] * s[1] * z[9]
                - 0.5 * p.beta12 * p.beta12 * y1 * (y1 + 1.0)
                - 0.5 * p.beta11 * p.beta11,
            short0 - z[5] * s[2] - s[2] * s[2] * z[11]
                - 0.5 * p.beta23 * p.beta23 * y2 * (y2 + 1.0)
                - 0.5 * p.beta21 * p.beta21,
            -a[0] * z[3],
            -a[1] * z[4] - p.beta12 * y1,
            -a[2] * z[5] - p.beta23 * y2,
            1.0 - 2.0 * a[0] * a[0] * z[7],
            z[6] - 3.0 * a[0] * z[7],
            1.0 - 2.0 * a[1] * a[1] * z[9],
            z[8] - 3.0 * a[1] * z[9],
            1.0 - 2.0 * a[2] * a[2] * z[11],
            z[10] - 3.0 * a[2] * z[11],
        ]
    }

    fn diffusion(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let p = &self.params;
        let mut b = vec![vec![0.0; 3]; 12];
        b[1] = vec![p.beta11, p.beta12 * self.spread(1, z), 0.0];
        b[2] = vec![p.beta21, 0.0, p.beta23 * self.spread(2, z)];
        b[3][0] = 1.0;
        b[4][1] = 1.0;
        b[5][2] = 1.0;
        b
    }
}
