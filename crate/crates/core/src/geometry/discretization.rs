//! Chebyshev–Gauss–Lobatto discretization of the state space `(r^0, …, r^m, Y^1, …, Y^m)`.
//!
//! Flat layout: the `m+1` curves sampled on the nodes (ascending, first node at 0),
//! followed by the `m` log-spreads.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::curves::{ForwardCurve, MultiCurveState, SampledCurve};

#[derive(Debug, Clone)]
pub struct Discretization {
    pub nodes: Arc<Vec<f64>>,
    /// Spectral derivative `F`.
    pub diff: DMatrix<f64>,
    /// Spectral antiderivative from zero `H`.
    pub integ: DMatrix<f64>,
    pub m: usize,
}

impl Discretization {
    /// `n + 1` nodes on `[0, length]` for a model with `m` tenors.
    pub fn chebyshev(n: usize, length: f64, m: usize) -> Self {
        let t: Vec<f64> = (0..=n).map(|k| (PI * k as f64 / n as f64).cos()).collect();
        let nodes: Vec<f64> = t.iter().map(|tk| 0.5 * length * (1.0 - tk)).collect();
        // Differentiation in t, then chain rule dx = −(L/2) dt.
        let c = |k: usize| {
            let s = if k == 0 || k == n { 2.0 } else { 1.0 };
            if k % 2 == 0 {
                s
            } else {
                -s
            }
        };
        let mut dt = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i != j {
                    dt[(i, j)] = c(i) / c(j) / (t[i] - t[j]);
                }
            }
        }
        for i in 0..=n {
            let s: f64 = (0..=n).filter(|&j| j != i).map(|j| dt[(i, j)]).sum();
            dt[(i, i)] = -s;
        }
        let diff = dt * (-2.0 / length);
        let mut integ = DMatrix::zeros(n + 1, n + 1);
        for col in 0..=n {
            let mut e = vec![0.0; n + 1];
            e[col] = 1.0;
            let v = cheb_integrate(&e, &t, n);
            for row in 0..=n {
                integ[(row, col)] = -0.5 * length * v[row];
            }
        }
        Self {
            nodes: Arc::new(nodes),
            diff,
            integ,
            m,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        (self.m + 1) * self.n_nodes() + self.m
    }

    pub fn curve<'a>(&self, flat: &'a [f64], j: usize) -> &'a [f64] {
        let n = self.n_nodes();
        &flat[j * n..(j + 1) * n]
    }

    /// Log-spread `j` in `1..=m`.
    pub fn spread(&self, flat: &[f64], j: usize) -> f64 {
        flat[(self.m + 1) * self.n_nodes() + j - 1]
    }

    pub fn to_state(&self, flat: &[f64]) -> MultiCurveState {
        let curves = (0..=self.m)
            .map(|j| {
                ForwardCurve::Sampled(SampledCurve {
                    grid: self.nodes.clone(),
                    values: self.curve(flat, j).to_vec(),
                })
            })
            .collect();
        let spreads = (1..=self.m).map(|j| self.spread(flat, j)).collect();
        MultiCurveState::new(curves, spreads).expect("consistent layout")
    }

    /// Samples an `embed`-style map `x ↦ (curves…, spreads…)` into the flat layout.
    pub fn sample(&self, f: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = vec![0.0; self.dim()];
        for (k, &x) in self.nodes.iter().enumerate() {
            let v = f(x);
            for j in 0..=self.m {
                out[j * n + k] = v[j];
            }
            if k == 0 {
                for j in 1..=self.m {
                    out[(self.m + 1) * n + j - 1] = v[self.m + j];
                }
            }
        }
        out
    }
}

/// Antiderivative (in t, vanishing at t = 1) of the interpolant through values at CGL nodes.
fn cheb_integrate(values: &[f64], t: &[f64], n: usize) -> Vec<f64> {
    let nf = n as f64;
    // coefficients a_j of Σ a_j T_j
    let a: Vec<f64> = (0..=n)
        .map(|j| {
            let s: f64 = (0..=n)
                .map(|k| {
                    let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                    w * values[k] * (PI * (j * k) as f64 / nf).cos()
                })
                .sum();
            let scale = if j == 0 || j == n { 1.0 / nf } else { 2.0 / nf };
            s * scale
        })
        .collect();
    // ∫ Σ a_j T_j = Σ b_j T_j
    let mut b = vec![0.0; n + 2];
    for (j, aj) in a.iter().enumerate() {
        match j {
            0 => b[1] += aj,
            1 => b[2] += aj / 4.0,
            _ => {
                b[j + 1] += aj / (2.0 * (j as f64 + 1.0));
                b[j - 1] -= aj / (2.0 * (j as f64 - 1.0));
            }
        }
    }
    let eval = |x: f64| -> f64 {
        let th = x.clamp(-1.0, 1.0).acos();
        b.iter().enumerate().map(|(j, bj)| bj * (j as f64 * th).cos()).sum()
    };
    let at_one = eval(1.0);
    t.iter().map(|&x| eval(x) - at_one).collect()
}
