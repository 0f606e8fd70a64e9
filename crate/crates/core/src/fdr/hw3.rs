//! Closed-form five-dimensional realization of the three-curve Hull–White model
//! with Nelson–Siegel initial curves `y0 + y1 e^{-a^j x} + y2 x e^{-a^j x}`.
//!
//! State `z = (z^0, z^0_1, z^1_1, z^2_1, z^3_1)`.

use crate::curves::{nelson_siegel, ForwardCurve, MultiCurveState};
use crate::error::{Error, Result};
use crate::hjm::ConstantVolSpec;

use super::Realization;

/// `θ = (a^0, σ^0, a^1, σ^1, a^2, σ^2, β^1, β^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub a: [f64; 3],
    pub sigma: [f64; 3],
    pub beta: [f64; 2],
}

impl Theta {
    pub const NAMES: [&'static str; 8] = ["a0", "sigma0", "a1", "sigma1", "a2", "sigma2", "beta1", "beta2"];

    pub fn to_vec(&self) -> [f64; 8] {
        [
            self.a[0],
            self.sigma[0],
            self.a[1],
            self.sigma[1],
            self.a[2],
            self.sigma[2],
            self.beta[0],
            self.beta[1],
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            a: [v[0], v[2], v[4]],
            sigma: [v[1], v[3], v[5]],
            beta: [v[6], v[7]],
        }
    }

    /// Positivity and pairwise distinct mean-reversion rates.
    pub fn validate(&self) -> Result<()> {
        if self.a.iter().chain(&self.sigma).any(|v| !(*v > 0.0)) {
            return Err(Error::Input("mean reversions and volatilities must be positive".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Input("spread volatilities must be finite".into()));
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if (self.a[p] - self.a[q]).abs() < 1e-6 {
                return Err(Error::Domain(format!(
                    "degenerate annihilator: a{p} and a{q} coincide"
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> ConstantVolSpec {
        ConstantVolSpec::hull_white(&self.a, &self.sigma, &self.beta).expect("fixed dimensions")
    }
}

/// `(1 − e^{−a u})/a`.
fn e1(a: f64, u: f64) -> f64 {
    -(-a * u).exp_m1() / a
}

/// `∫_0^u s e^{−a s} ds`.
fn e2(a: f64, u: f64) -> f64 {
    (1.0 - (-a * u).exp() * (1.0 + a * u)) / (a * a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hw3Fdr {
    pub theta: Theta,
    /// Nelson–Siegel parameters shared by the three initial curves.
    pub y: [f64; 3],
    /// Initial log-spreads `y^M_1, y^M_2`.
    pub y_m: [f64; 2],
}

impl Hw3Fdr {
    pub fn new(theta: Theta, y: [f64; 3], y_m: [f64; 2]) -> Result<Self> {
        theta.validate()?;
        Ok(Self::unchecked(theta, y, y_m))
    }

    /// Embedding only; the rates need not be distinct.
    pub(crate) fn unchecked(theta: Theta, y: [f64; 3], y_m: [f64; 2]) -> Self {
        Self { theta, y, y_m }
    }

    pub fn initial_state(&self) -> MultiCurveState {
        MultiCurveState::new(
            (0..3)
                .map(|j| ForwardCurve::Analytic(nelson_siegel(self.y, self.theta.a[j])))
                .collect(),
            self.y_m.to_vec(),
        )
        .expect("fixed dimensions")
    }

    fn beta_bar(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.theta.beta[j - 1]
        }
    }

    /// `∫_0^u r^M_j`.
    fn initial_integral(&self, j: usize, u: f64) -> f64 {
        let a = self.theta.a[j];
        self.y[0] * u + self.y[1] * e1(a, u) + self.y[2] * e2(a, u)
    }

    /// `(z^0_1, p_0, p_1, p_2)` with `p_j = z^1_1 − a^j z^2_1 + (a^j)² z^3_1`; the embedding
    /// depends on `z₁` only through these.
    pub fn reduced_state(&self, z: &[f64]) -> [f64; 4] {
        let p = |a: f64| z[2] - a * z[3] + a * a * z[4];
        [z[1], p(self.theta.a[0]), p(self.theta.a[1]), p(self.theta.a[2])]
    }

    /// Inverse of `reduced_state` on the `z₁` block (a Vandermonde solve).
    pub fn state_from_reduced(&self, q: &[f64; 4]) -> Result<[f64; 4]> {
        let a = self.theta.a;
        let v = nalgebra::Matrix3::from_fn(|r, c| (-a[r]).powi(c as i32));
        let rhs = nalgebra::Vector3::new(q[1], q[2], q[3]);
        let sol = v
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("coinciding mean reversions".into()))?;
        Ok([q[0], sol[0], sol[1], sol[2]])
    }

    /// `∫_0^x G^j` at elapsed time `tau` and reduced state `q`.
    pub fn curve_integral_reduced(&self, j: usize, tau: f64, q: &[f64; 4], x: f64) -> f64 {
        let (a, s) = (self.theta.a[j], self.theta.sigma[j]);
        let k = s / a;
        self.initial_integral(j, x + tau) - self.initial_integral(j, tau)
            + s * (q[0] - a * q[1 + j]) * e1(a, x)
            + 0.5 * k * k * (-2.0 * a * tau).exp_m1() * e1(2.0 * a, x)
            - k * (k - self.beta_bar(j)) * (-a * tau).exp_m1() * e1(a, x)
    }

    /// `G^{2+j}` at elapsed time `tau` and reduced state `q`.
    pub fn log_spread_reduced(&self, j: usize, tau: f64, q: &[f64; 4]) -> f64 {
        let t = &self.theta;
        let (a0, s0) = (t.a[0], t.sigma[0]);
        let (aj, sj, bj) = (t.a[j], t.sigma[j], t.beta[j - 1]);
        let quad = |a: f64, s: f64| {
            let k = s / a;
            0.5 * k * k * (tau - 2.0 * e1(a, tau) + e1(2.0 * a, tau))
        };
        bj * q[0] + s0 * q[1] - sj * q[1 + j]
            + self.y_m[j - 1]
            + self.initial_integral(0, tau)
            - self.initial_integral(j, tau)
            + quad(a0, s0)
            - quad(aj, sj)
            + sj / aj * bj * (tau - e1(aj, tau))
            - 0.5 * bj * bj * tau
    }

    /// `∫_0^x G^j(z, u) du` in closed form.
    pub fn curve_integral(&self, j: usize, z: &[f64], x: f64) -> f64 {
        self.curve_integral_reduced(j, z[0], &self.reduced_state(z), x)
    }

    /// Model yield `(1/x)∫_0^x G^j`.
    pub fn yield_value(&self, j: usize, z: &[f64], x: f64) -> f64 {
        self.curve_integral(j, z, x) / x
    }

    /// Ascending coefficients of `(γ+a^0)(γ+a^1)(γ+a^2)`.
    pub fn annihilator_coeffs(&self) -> [f64; 4] {
        let [a0, a1, a2] = self.theta.a;
        [a0 * a1 * a2, a0 * a1 + a0 * a2 + a1 * a2, a0 + a1 + a2, 1.0]
    }
}

impl Realization for Hw3Fdr {
    fn n(&self) -> usize {
        5
    }

    fn m(&self) -> usize {
        2
    }

    fn d(&self) -> usize {
        1
    }

    fn curve(&self, j: usize, z: &[f64], x: f64) -> f64 {
        let (a, s) = (self.theta.a[j], self.theta.sigma[j]);
        let tau = z[0];
        let k = s / a;
        let u = x + tau;
        let ea = (-a * x).exp();
        self.y[0] + (self.y[1] + self.y[2] * u) * (-a * u).exp()
            + s * ea * (z[1] - a * (z[2] - a * z[3] + a * a * z[4]))
            + 0.5 * k * k * ea * ea * (-2.0 * a * tau).exp_m1()
            - k * (k - self.beta_bar(j)) * ea * (-a * tau).exp_m1()
    }

    fn log_spread(&self, j: usize, z: &[f64]) -> f64 {
        self.log_spread_reduced(j, z[0], &self.reduced_state(z))
    }

    fn drift(&self, z: &[f64]) -> Vec<f64> {
        let c = self.annihilator_coeffs();
        vec![1.0, 0.0, z[1] - c[0] * z[4], z[2] - c[1] * z[4], z[3] - c[2] * z[4]]
    }

    fn diffusion(&self, _z: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![0.0], vec![1.0], vec![0.0], vec![0.0], vec![0.0]]
    }
}
