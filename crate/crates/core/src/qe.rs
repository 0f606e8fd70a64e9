//! Quasi-exponential (QE) functions.
//!
//! A QE function is a finite sum of terms `e^{αx}(p(x)cos(ωx) + q(x)sin(ωx))`.
//! Internally every term is handled as `Re[c(x) e^{ρx}]` with `ρ = α + iω` and
//! `c = p − i q`, which turns differentiation, integration and products into
//! polynomial arithmetic over the complex numbers.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Relative tolerance used to identify two exponential rates (or frequencies).
pub const RATE_TOL: f64 = 1e-12;
/// Coefficients at or below this magnitude are treated as zero.
pub const ZERO_TOL: f64 = 1e-14;

/// One `e^{rate·x}(cos_poly(x)cos(freq·x) + sin_poly(x)sin(freq·x))` term.
#[derive(Debug, Clone, PartialEq)]
pub struct QeTerm {
    pub rate: f64,
    pub freq: f64,
    pub cos_poly: Vec<f64>,
    pub sin_poly: Vec<f64>,
}

impl QeTerm {
    fn degree(&self) -> usize {
        self.cos_poly.len().max(self.sin_poly.len()).saturating_sub(1)
    }

    fn evaluate(&self, x: f64) -> f64 {
        let e = (self.rate * x).exp();
        let p = horner(&self.cos_poly, x);
        if self.freq == 0.0 {
            return e * p;
        }
        let q = horner(&self.sin_poly, x);
        e * (p * (self.freq * x).cos() + q * (self.freq * x).sin())
    }
}

/// A quasi-exponential function in canonical (merged, trimmed, sorted) form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QeFunction {
    terms: Vec<QeTerm>,
}

/// Monic polynomial in the derivative operator, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilatorPoly {
    pub coeffs: Vec<f64>,
}

/// A root of an annihilator: `rate ± i·freq` with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub rate: f64,
    pub freq: f64,
    pub multiplicity: usize,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATE_TOL * a.abs().max(1.0)
}

/// Complex working form of a term.
#[derive(Clone)]
struct CTerm {
    rho: Complex64,
    c: Vec<Complex64>,
}

fn poly_add_into(acc: &mut Vec<Complex64>, other: &[Complex64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), Complex64::new(0.0, 0.0));
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    while v.last().is_some_and(|x| x.abs() <= ZERO_TOL) {
        v.pop();
    }
    v
}

impl QeFunction {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::poly_exp(&[c], 0.0)
    }

    /// `coef · e^{rate·x}`.
    pub fn exp(coef: f64, rate: f64) -> Self {
        Self::poly_exp(&[coef], rate)
    }

    /// `p(x) · e^{rate·x}` with `p` in ascending coefficients.
    pub fn poly_exp(poly: &[f64], rate: f64) -> Self {
        Self::from_terms(vec![QeTerm {
            rate,
            freq: 0.0,
            cos_poly: poly.to_vec(),
            sin_poly: Vec::new(),
        }])
    }

    /// `e^{rate·x}(p(x)cos(freq·x) + q(x)sin(freq·x))`.
    pub fn oscillating(cos_poly: &[f64], sin_poly: &[f64], rate: f64, freq: f64) -> Self {
        Self::from_terms(vec![QeTerm {
            rate,
            freq,
            cos_poly: cos_poly.to_vec(),
            sin_poly: sin_poly.to_vec(),
        }])
    }

    /// Builds the canonical form of an arbitrary term list.
    pub fn from_terms(terms: Vec<QeTerm>) -> Self {
        let cterms = terms
            .into_iter()
            .map(|t| {
                let n = t.cos_poly.len().max(t.sin_poly.len());
                let c = (0..n)
                    .map(|k| {
                        let p = t.cos_poly.get(k).copied().unwrap_or(0.0);
                        let q = t.sin_poly.get(k).copied().unwrap_or(0.0);
                        Complex64::new(p, -q)
                    })
                    .collect();
                CTerm {
                    rho: Complex64::new(t.rate, t.freq),
                    c,
                }
            })
            .collect();
        Self::canonical(cterms)
    }

    fn to_complex(&self) -> Vec<CTerm> {
        self.terms
            .iter()
            .map(|t| {
                let n = t.cos_poly.len().max(t.sin_poly.len());
                let c = (0..n)
                    .map(|k| {
                        Complex64::new(
                            t.cos_poly.get(k).copied().unwrap_or(0.0),
                            -t.sin_poly.get(k).copied().unwrap_or(0.0),
                        )
                    })
                    .collect();
                CTerm {
                    rho: Complex64::new(t.rate, t.freq),
                    c,
                }
            })
            .collect()
    }

    fn canonical(cterms: Vec<CTerm>) -> Self {
        let mut merged: Vec<CTerm> = Vec::new();
        for mut t in cterms {
            if t.rho.im < 0.0 {
                t.rho = t.rho.conj();
                t.c.iter_mut().for_each(|v| *v = v.conj());
            }
            if t.rho.re.abs() <= RATE_TOL {
                t.rho.re = 0.0;
            }
            if t.rho.im.abs() <= RATE_TOL {
                t.rho.im = 0.0;
                // Re[c e^{αx}] only sees the real part of c.
                t.c.iter_mut().for_each(|v| v.im = 0.0);
            }
            match merged
                .iter_mut()
                .find(|m| same_rate(m.rho.re, t.rho.re) && same_rate(m.rho.im, t.rho.im))
            {
                Some(m) => poly_add_into(&mut m.c, &t.c),
                None => merged.push(t),
            }
        }
        let mut terms: Vec<QeTerm> = merged
            .into_iter()
            .filter_map(|t| {
                let cos_poly = trim(t.c.iter().map(|v| v.re).collect());
                let sin_poly = if t.rho.im == 0.0 {
                    Vec::new()
                } else {
                    trim(t.c.iter().map(|v| -v.im).collect())
                };
                if cos_poly.is_empty() && sin_poly.is_empty() {
                    None
                } else {
                    Some(QeTerm {
                        rate: t.rho.re,
                        freq: t.rho.im,
                        cos_poly,
                        sin_poly,
                    })
                }
            })
            .collect();
        terms.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.freq.total_cmp(&b.freq)));
        Self { terms }
    }

    pub fn terms(&self) -> &[QeTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.evaluate(x)).sum()
    }

    /// Operator **B**: value at zero.
    pub fn eval_at_zero(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.cos_poly.first().copied().unwrap_or(0.0))
            .sum()
    }

    /// Operator **F**: exact derivative.
    pub fn derive(&self) -> Self {
        let out = self
            .to_complex()
            .into_iter()
            .map(|t| {
                let n = t.c.len();
                let c = (0..n)
                    .map(|k| {
                        let d = if k + 1 < n {
                            t.c[k + 1] * (k as f64 + 1.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        d + t.rho * t.c[k]
                    })
                    .collect();
                CTerm { rho: t.rho, c }
            })
            .collect();
        Self::canonical(out)
    }

    /// `F^k f`.
    pub fn derive_n(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |f, _| f.derive())
    }

    /// Operator **H**: antiderivative vanishing at zero.
    pub fn integrate_from_zero(&self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        let mut offset = 0.0;
        for t in self.to_complex() {
            let n = t.c.len();
            if t.rho.re == 0.0 && t.rho.im == 0.0 {
                let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
                for k in 0..n {
                    c[k + 1] = t.c[k] / (k as f64 + 1.0);
                }
                out.push(CTerm { rho: t.rho, c });
            } else {
                // Solve q' + ρq = c for a polynomial q of the same degree.
                let mut q = vec![Complex64::new(0.0, 0.0); n];
                for k in (0..n).rev() {
                    let next = if k + 1 < n {
                        q[k + 1] * (k as f64 + 1.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    q[k] = (t.c[k] - next) / t.rho;
                }
                offset += q.first().map_or(0.0, |v| v.re);
                out.push(CTerm { rho: t.rho, c: q });
            }
        }
        out.push(CTerm {
            rho: Complex64::new(0.0, 0.0),
            c: vec![Complex64::new(-offset, 0.0)],
        });
        Self::canonical(out)
    }

    /// Exact product.
    pub fn multiply(&self, other: &Self) -> Self {
        let a = self.to_complex();
        let b = other.to_complex();
        let mut out = Vec::with_capacity(2 * a.len() * b.len());
        for s in &a {
            for t in &b {
                let half = Complex64::new(0.5, 0.0);
                let p1: Vec<_> = poly_mul(&s.c, &t.c).into_iter().map(|v| v * half).collect();
                let tc: Vec<_> = t.c.iter().map(|v| v.conj()).collect();
                let p2: Vec<_> = poly_mul(&s.c, &tc).into_iter().map(|v| v * half).collect();
                out.push(CTerm {
                    rho: s.rho + t.rho,
                    c: p1,
                });
                out.push(CTerm {
                    rho: s.rho + t.rho.conj(),
                    c: p2,
                });
            }
        }
        Self::canonical(out)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| QeTerm {
                    rate: t.rate,
                    freq: t.freq,
                    cos_poly: t.cos_poly.iter().map(|v| v * k).collect(),
                    sin_poly: t.sin_poly.iter().map(|v| v * k).collect(),
                })
                .collect(),
        )
    }

    /// `x ↦ f(x + s)`.
    pub fn shift(&self, s: f64) -> Self {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in self.to_complex() {
            // c(x+s) e^{ρ(x+s)} = e^{ρs} c(x+s) e^{ρx}
            let n = t.c.len();
            let mut c = vec![Complex64::new(0.0, 0.0); n];
            for (k, ck) in t.c.iter().enumerate() {
                // (x+s)^k = Σ_l binom(k,l) s^{k-l} x^l
                let mut binom = 1.0;
                for l in 0..=k {
                    c[l] += ck * binom * s.powi((k - l) as i32);
                    binom = binom * (k - l) as f64 / (l as f64 + 1.0);
                }
            }
            let factor = (t.rho * s).exp();
            c.iter_mut().for_each(|v| *v *= factor);
            out.push(CTerm { rho: t.rho, c });
        }
        Self::canonical(out)
    }

    /// Roots of the minimal annihilator, one per term.
    pub fn roots(&self) -> Vec<Root> {
        self.terms
            .iter()
            .map(|t| Root {
                rate: t.rate,
                freq: t.freq,
                multiplicity: t.degree() + 1,
            })
            .collect()
    }

    /// Minimal monic polynomial `M` with `M(F) f = 0`.
    pub fn annihilator(&self) -> Result<AnnihilatorPoly> {
        if self.is_zero() {
            return Err(Error::Domain("no minimal annihilator for the zero function".into()));
        }
        Ok(AnnihilatorPoly::from_roots(&self.roots()))
    }

    /// Dimension of `span{F^k f}`; zero for the zero function.
    pub fn krylov_dimension(&self) -> usize {
        self.roots()
            .iter()
            .map(|r| if r.freq == 0.0 { r.multiplicity } else { 2 * r.multiplicity })
            .sum()
    }

    /// Canonical comparison with a relative coefficient tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = self - other;
        let scale = self.max_coeff().max(other.max_coeff()).max(1.0);
        diff.terms
            .iter()
            .flat_map(|t| t.cos_poly.iter().chain(&t.sin_poly))
            .all(|v| v.abs() <= tol * scale)
    }

    fn max_coeff(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.cos_poly.iter().chain(&t.sin_poly))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl AnnihilatorPoly {
    pub fn from_roots(roots: &[Root]) -> Self {
        let mut coeffs = vec![1.0];
        for r in roots {
            let factor: Vec<f64> = if r.freq == 0.0 {
                vec![-r.rate, 1.0]
            } else {
                vec![r.rate * r.rate + r.freq * r.freq, -2.0 * r.rate, 1.0]
            };
            for _ in 0..r.multiplicity {
                let mut next = vec![0.0; coeffs.len() + factor.len() - 1];
                for (i, a) in coeffs.iter().enumerate() {
                    for (j, b) in factor.iter().enumerate() {
                        next[i + j] += a * b;
                    }
                }
                coeffs = next;
            }
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ_h coeffs[h] F^h f`.
    pub fn apply(&self, f: &QeFunction) -> QeFunction {
        let mut acc = QeFunction::zero();
        let mut d = f.clone();
        for (h, c) in self.coeffs.iter().enumerate() {
            if h > 0 {
                d = d.derive();
            }
            acc = &acc + &d.scale(*c);
        }
        acc
    }
}

impl Add for &QeFunction {
    type Output = QeFunction;
    fn add(self, rhs: &QeFunction) -> QeFunction {
        let mut t = self.terms.clone();
        t.extend(rhs.terms.iter().cloned());
        QeFunction::from_terms(t)
    }
}

impl Sub for &QeFunction {
    type Output = QeFunction;
    fn sub(self, rhs: &QeFunction) -> QeFunction {
        self + &(-rhs)
    }
}

impl Neg for &QeFunction {
    type Output = QeFunction;
    fn neg(self) -> QeFunction {
        self.scale(-1.0)
    }
}

impl Mul for &QeFunction {
    type Output = QeFunction;
    fn mul(self, rhs: &QeFunction) -> QeFunction {
        self.multiply(rhs)
    }
}
