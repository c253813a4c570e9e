//! Truncated Taylor series ("jets") at a real center.
//!
//! A jet of order `N` stores `c_0..c_N` with `c_k = f^{(k)}(center) / k!`.
//! Arithmetic on jets is exact up to rounding, so composing jets of the
//! elementary pieces yields derivatives of arbitrary closed forms.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorJet {
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl TaylorJet {
    pub fn constant(center: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { center, coeffs }
    }

    /// The identity function `x` expanded at `center`.
    pub fn variable(center: f64, order: usize) -> Self {
        let mut jet = Self::constant(center, center, order);
        if order >= 1 {
            jet.coeffs[1] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(center: f64, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Self { center, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f^{(k)}(center) = k! c_k`.
    pub fn derivative_at(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.derivative_at(k)).collect()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        Self::from_coeffs(self.center, self.coeffs[..=n].to_vec())
    }

    /// Jet of `f'`, one order shorter.
    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::constant(self.center, 0.0, 0);
        }
        let coeffs = (1..=self.order())
            .map(|k| k as f64 * self.coeffs[k])
            .collect();
        Self::from_coeffs(self.center, coeffs)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_coeffs(self.center, self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn add_scalar(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    pub fn recip(&self) -> Result<Self> {
        Self::constant(self.center, 1.0, self.order()).checked_div(self)
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        let n = self.order().min(rhs.order());
        let b0 = rhs.coeffs[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::Domain(format!(
                "jet division by a series with constant term {b0}"
            )));
        }
        let mut q = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= rhs.coeffs[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Ok(Self::from_coeffs(self.center, q))
    }

    /// Natural logarithm; requires a positive constant term.
    pub fn ln(&self) -> Result<Self> {
        let f0 = self.coeffs[0];
        if f0 <= 0.0 || !f0.is_finite() {
            return Err(Error::Domain(format!("jet logarithm of constant term {f0}")));
        }
        Ok(self.log_recurrence(f0.ln(), f0))
    }

    /// `ln(1 + self)`, accurate when the constant term is small.
    pub fn ln_1p(&self) -> Result<Self> {
        let u0 = self.coeffs[0];
        if u0 <= -1.0 || !u0.is_finite() {
            return Err(Error::Domain(format!("jet ln_1p of constant term {u0}")));
        }
        Ok(self.log_recurrence(u0.ln_1p(), 1.0 + u0))
    }

    // g = ln f  =>  g' f = f', solved order by order.
    fn log_recurrence(&self, g0: f64, f0: f64) -> Self {
        let n = self.order();
        let f = &self.coeffs;
        let mut g = vec![0.0; n + 1];
        g[0] = g0;
        for k in 1..=n {
            let mut acc = f[k];
            for j in 1..k {
                acc -= (j as f64) * g[j] * f[k - j] / k as f64;
            }
            g[k] = acc / f0;
        }
        Self::from_coeffs(self.center, g)
    }

    pub fn exp(&self) -> Self {
        let n = self.order();
        let f = &self.coeffs;
        let mut e = vec![0.0; n + 1];
        e[0] = f[0].exp();
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * f[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Self::from_coeffs(self.center, e)
    }

    /// Real power `self^alpha`; requires a positive constant term.
    pub fn powf(&self, alpha: f64) -> Result<Self> {
        let n = self.order();
        let f = &self.coeffs;
        let f0 = f[0];
        if f0 <= 0.0 || !f0.is_finite() {
            return Err(Error::Domain(format!("jet power of constant term {f0}")));
        }
        let mut p = vec![0.0; n + 1];
        p[0] = f0.powf(alpha);
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((alpha + 1.0) * j as f64 - k as f64) * f[j] * p[k - j];
            }
            p[k] = acc / (k as f64 * f0);
        }
        Ok(Self::from_coeffs(self.center, p))
    }

    pub fn powi(&self, exponent: u32) -> Self {
        let mut out = Self::constant(self.center, 1.0, self.order());
        for _ in 0..exponent {
            out = &out * self;
        }
        out
    }

    /// Divides out a simple root at `center - delta`, i.e. returns the jet of
    /// `f(x) / (x - center + delta)` given that `f` vanishes at `center - delta`.
    ///
    /// The recurrence runs from the highest coefficient downwards, so it is
    /// stable whenever `|delta|` is smaller than the radius of convergence;
    /// the result has one order less than the input.
    pub fn deflate_root(&self, delta: f64) -> Self {
        let m = self.order();
        assert!(m >= 1, "deflation needs a jet of order at least one");
        let mut q = vec![0.0; m];
        let mut next = 0.0;
        for k in (1..=m).rev() {
            let qk = self.coeffs[k] - delta * next;
            q[k - 1] = qk;
            next = qk;
        }
        Self::from_coeffs(self.center, q)
    }

    /// Largest `|c_k| h^k / |c_0|` over the jet, with `h` the natural length
    /// scale of the expansion (the distance of the center from the origin).
    pub fn amplification(&self) -> f64 {
        let c0 = self.coeffs[0].abs();
        let h = self.center.abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        let mut hk = 1.0;
        for c in &self.coeffs {
            worst = worst.max(c.abs() * hk);
            hk *= h;
        }
        if c0 == 0.0 {
            f64::INFINITY
        } else {
            worst / c0
        }
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Add for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: &TaylorJet) -> TaylorJet {
        let n = self.order().min(rhs.order());
        TaylorJet::from_coeffs(
            self.center,
            (0..=n).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect(),
        )
    }
}

impl Sub for &TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: &TaylorJet) -> TaylorJet {
        let n = self.order().min(rhs.order());
        TaylorJet::from_coeffs(
            self.center,
            (0..=n).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect(),
        )
    }
}

impl Mul for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: &TaylorJet) -> TaylorJet {
        let n = self.order().min(rhs.order());
        let coeffs = (0..=n)
            .map(|k| (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum())
            .collect();
        TaylorJet::from_coeffs(self.center, coeffs)
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_variable_at_zero() {
        let x = TaylorJet::variable(0.0, 6);
        let e = x.exp();
        for k in 0..=6 {
            assert_relative_eq!(e.coeffs[k], 1.0 / factorial(k), max_relative = 1e-15);
        }
    }

    #[test]
    fn ln_matches_known_series() {
        // ln(x) at x=2: c_k = (-1)^{k+1} / (k 2^k)
        let x = TaylorJet::variable(2.0, 8);
        let l = x.ln().unwrap();
        assert_relative_eq!(l.coeffs[0], 2f64.ln());
        for k in 1..=8 {
            let expect = (-1f64).powi(k as i32 + 1) / (k as f64 * 2f64.powi(k as i32));
            assert_relative_eq!(l.coeffs[k], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = TaylorJet::variable(0.7, 10);
        let f = (&x * &x).add_scalar(1.0);
        let g = x.exp();
        let q = (&f * &g).checked_div(&g).unwrap();
        for k in 0..=10 {
            assert_relative_eq!(q.coeffs[k], f.coeffs[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn powf_matches_repeated_product() {
        let x = TaylorJet::variable(1.3, 7).add_scalar(0.5);
        let a = x.powf(3.0).unwrap();
        let b = x.powi(3);
        for k in 0..=7 {
            assert_relative_eq!(a.coeffs[k], b.coeffs[k], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn deflation_recovers_quotient() {
        // f(x) = (x - 0.9) e^x expanded at 1.0 (delta = 0.1)
        let x = TaylorJet::variable(1.0, 40);
        let f = &x.add_scalar(-0.9) * &x.exp();
        let q = f.deflate_root(0.1);
        let e = TaylorJet::variable(1.0, 10).exp();
        for k in 0..=10 {
            assert_relative_eq!(q.coeffs[k], e.coeffs[k], max_relative = 1e-13);
        }
    }

    #[test]
    fn division_by_vanishing_series_is_an_error() {
        let x = TaylorJet::variable(0.0, 3);
        assert!(x.recip().is_err());
        assert!(x.ln().is_err());
    }
}
