//! Rational functions of the concurrency level `k`.
//!
//! Cost functions are stored as ascending-degree coefficient vectors
//! `c_0..c_p` and `d_0..d_q` with `d_0 = 1`. A function is only valid on an
//! integer concurrency domain `[1, k_max]`, and construction verifies that
//! both the denominator and the value are strictly positive on every
//! integer point of that domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported polynomial degree for numerator and denominator.
pub const MAX_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RationalFn {
    num: Vec<f64>,
    den: Vec<f64>,
    k_max: u32,
}

/// Serialized coefficient pair, ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl RationalFn {
    pub fn new(num: Vec<f64>, den: Vec<f64>, k_max: u32) -> Result<Self> {
        if num.is_empty() || num.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!(
                "numerator must have 1..={} coefficients, got {}",
                MAX_DEGREE + 1,
                num.len()
            )));
        }
        if den.is_empty() || den.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidParameter(format!(
                "denominator must have 1..={} coefficients, got {}",
                MAX_DEGREE + 1,
                den.len()
            )));
        }
        if den[0] != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "denominator must be normalized with d_0 = 1, got {}",
                den[0]
            )));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "rational coefficients must be finite".into(),
            ));
        }
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        let f = RationalFn { num, den, k_max };
        for k in 1..=k_max {
            let x = f64::from(k);
            let d = horner(&f.den, x);
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "denominator is {d} at k={k}; must be positive on [1, {k_max}]"
                )));
            }
            let v = horner(&f.num, x) / d;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "value is {v} at k={k}; must be positive on [1, {k_max}]"
                )));
            }
        }
        Ok(f)
    }

    /// A constant function `value` on `[1, k_max]`.
    pub fn constant(value: f64, k_max: u32) -> Result<Self> {
        RationalFn::new(vec![value], vec![1.0], k_max)
    }

    /// Constant function padded to the given degrees, useful where a fixed
    /// coefficient layout is required.
    pub fn constant_with_degrees(value: f64, p: usize, q: usize, k_max: u32) -> Result<Self> {
        let mut num = vec![0.0; p + 1];
        let mut den = vec![0.0; q + 1];
        num[0] = value;
        den[0] = 1.0;
        RationalFn::new(num, den, k_max)
    }

    pub fn from_coefficients(coeffs: &Coefficients, k_max: u32) -> Result<Self> {
        RationalFn::new(coeffs.c.clone(), coeffs.d.clone(), k_max)
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            c: self.num.clone(),
            d: self.den.clone(),
        }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    /// `(p, q)` degrees as given by the coefficient vector lengths.
    pub fn degrees(&self) -> (usize, usize) {
        (self.num.len() - 1, self.den.len() - 1)
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// Evaluates the function at integer concurrency `k`.
    pub fn eval(&self, k: u32) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::Domain {
                k,
                k_max: self.k_max,
            });
        }
        Ok(self.eval_at(f64::from(k)))
    }

    /// Evaluates at an arbitrary real point without a domain check. Used for
    /// plotting between integer concurrency levels.
    pub fn eval_at(&self, x: f64) -> f64 {
        horner(&self.num, x) / horner(&self.den, x)
    }

    /// The limit as `k` grows, when numerator and denominator share a degree.
    pub fn asymptote(&self) -> Option<f64> {
        let (p, q) = self.degrees();
        if p == q && self.den[q] != 0.0 {
            Some(self.num[p] / self.den[q])
        } else {
            None
        }
    }

    /// True if the value never increases from one integer `k` to the next.
    pub fn is_nonincreasing(&self) -> bool {
        (1..self.k_max).all(|k| self.eval_at(f64::from(k + 1)) <= self.eval_at(f64::from(k)))
    }

    /// Returns a copy valid on a narrower or wider domain, re-checking
    /// positivity.
    pub fn with_k_max(&self, k_max: u32) -> Result<Self> {
        RationalFn::new(self.num.clone(), self.den.clone(), k_max)
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_identity() {
        let f = RationalFn::new(vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], 128).unwrap();
        assert_eq!(f.eval(7).unwrap(), 1.0);
    }

    #[test]
    fn equal_degree_asymptote() {
        let f = RationalFn::new(vec![0.0, 0.0, 2.0], vec![1.0, 0.0, 1.0], 1_000_000).unwrap();
        assert!((f.eval(1_000_000).unwrap() - 2.0).abs() < 1e-4);
        assert_eq!(f.asymptote(), Some(2.0));
    }

    #[test]
    fn hand_evaluated_ratio() {
        // (4 + 2·3) / (1 + 3) = 2.5
        let f = RationalFn::new(vec![4.0, 2.0, 0.0], vec![1.0, 1.0, 0.0], 8).unwrap();
        assert_eq!(f.eval(3).unwrap(), 2.5);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let f = RationalFn::constant(1.0, 16).unwrap();
        assert!(matches!(f.eval(0), Err(Error::Domain { k: 0, k_max: 16 })));
        assert!(matches!(f.eval(17), Err(Error::Domain { .. })));
    }

    #[test]
    fn rejects_unnormalized_denominator() {
        assert!(RationalFn::new(vec![1.0], vec![2.0], 4).is_err());
    }

    #[test]
    fn rejects_vanishing_denominator() {
        // 1 - k/3 hits zero at k = 3.
        assert!(RationalFn::new(vec![1.0], vec![1.0, -1.0 / 3.0], 8).is_err());
        // Fine when the domain stops before the root.
        assert!(RationalFn::new(vec![1.0], vec![1.0, -1.0 / 3.0], 2).is_ok());
    }

    #[test]
    fn rejects_negative_values() {
        assert!(RationalFn::new(vec![5.0, -1.0], vec![1.0], 8).is_err());
    }

    #[test]
    fn rejects_degree_above_three() {
        assert!(RationalFn::new(vec![1.0; 5], vec![1.0], 8).is_err());
    }
}
