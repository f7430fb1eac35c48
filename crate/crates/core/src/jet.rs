//! Truncated Taylor series arithmetic.
//!
//! A [`Jet`] stores normalized coefficients `c_k = f^(k)(t0) / k!` up to a
//! fixed order. Composing elementary operations on jets yields exact
//! high-order derivatives of closed-form densities without symbolic algebra.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// The independent variable `t0 + (t - t0)`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = t0;
        if order > 0 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Self { c }
    }

    pub fn from_coefficients(c: Vec<f64>) -> Self {
        assert!(!c.is_empty(), "a jet needs at least one coefficient");
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }

    /// All derivatives `f, f', f'', ...` at the expansion point.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.c.len()).map(|k| self.derivative(k)).collect()
    }

    /// Derivative of the underlying function, one order shorter.
    pub fn differentiate(&self) -> Self {
        if self.c.len() == 1 {
            return Jet::constant(0.0, 0);
        }
        Self {
            c: (1..self.c.len()).map(|k| k as f64 * self.c[k]).collect(),
        }
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        Self {
            c: self.c[..=order.min(self.order())].to_vec(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| a * v).collect(),
        }
    }

    pub fn offset(&self, a: f64) -> Self {
        let mut c = self.c.clone();
        c[0] += a;
        Self { c }
    }

    pub fn recip(&self) -> Self {
        Jet::constant(1.0, self.order()) / self.clone()
    }

    pub fn exp(&self) -> Self {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.c[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Self { c: e }
    }

    /// Natural logarithm; requires a positive value.
    pub fn ln(&self) -> Self {
        let a = &self.c;
        let n = a.len();
        let mut l = vec![0.0; n];
        l[0] = a[0].ln();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Self { c: l }
    }

    /// Real power; requires a positive value.
    pub fn powf(&self, p: f64) -> Self {
        let a = &self.c;
        let n = a.len();
        let mut y = vec![0.0; n];
        y[0] = a[0].powf(p);
        for k in 1..n {
            let s: f64 = (1..=k)
                .map(|j| (p * j as f64 - (k - j) as f64) * a[j] * y[k - j])
                .sum();
            y[k] = s / (k as f64 * a[0]);
        }
        Self { c: y }
    }

    pub fn powi(&self, p: i32) -> Self {
        let order = self.order();
        let mut out = Jet::constant(1.0, order);
        let base = if p < 0 { self.recip() } else { self.clone() };
        for _ in 0..p.unsigned_abs() {
            out = out * base.clone();
        }
        out
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.c;
        let n = a.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..n {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Self { c: s }, Self { c })
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    /// Evaluates a polynomial given by Taylor coefficients about
    /// `self.value()` at this jet, i.e. the composition `p(self)`.
    pub fn compose(&self, taylor: &[f64]) -> Self {
        let order = self.order();
        let shift = self.offset(-self.value());
        let mut out = Jet::constant(*taylor.last().unwrap_or(&0.0), order);
        for &coef in taylor.iter().rev().skip(1) {
            out = (out * shift.clone()).offset(coef);
        }
        out
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        let c = (0..n)
            .map(|k| (0..=k).map(|j| self.c[j] * rhs.c[k - j]).sum())
            .collect();
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let n = self.c.len().min(rhs.c.len());
        let mut q = vec![0.0; n];
        for k in 0..n {
            let s: f64 = (0..k).map(|j| q[j] * rhs.c[k - j]).sum();
            q[k] = (self.c[k] - s) / rhs.c[0];
        }
        Jet { c: q }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.offset(rhs)
    }
}
