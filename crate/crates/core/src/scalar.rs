//! Scalars that are exact rationals whenever possible and binary64 otherwise.
//!
//! Evaluation of a polynomial expression at a rational point stays exact;
//! the moment a sin/cos/exp atom is touched the value degrades to a float.
//! Comparisons in numeric mode use an absolute tolerance (1e-9 by default).

use std::cmp::Ordering;
use std::fmt;

use crate::rational::Rational;

/// Default absolute tolerance for numeric-mode comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(Rational),
    Approx(f64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Rational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::Exact(Rational::from_int(n))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64(),
            Scalar::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Approx(_) => None,
        }
    }

    /// Exact zero test for rationals, |x| <= tol for floats.
    pub fn is_zero_within(&self, tol: f64) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx(x) => x.abs() <= tol,
        }
    }

    /// Equality that is exact on two rationals and tolerance-based otherwise.
    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => (self.to_f64() - other.to_f64()).abs() <= tol,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Approx(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Approx(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Approx(x) => Scalar::Approx(-x),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    /// Total order used for deterministic report sorting: by numeric value,
    /// exact values first on ties.
    pub fn sort_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp_value(b),
            _ => {
                let x = self.to_f64();
                let y = other.to_f64();
                x.partial_cmp(&y)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| self.is_exact().cmp(&other.is_exact()).reverse())
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{r}"),
            Scalar::Approx(x) => write!(f, "{x:?}"),
        }
    }
}

impl Scalar {
    /// Report form: exact values as `num/den`, floats in shortest round-trip form.
    pub fn report_string(&self) -> String {
        match self {
            Scalar::Exact(r) => r.to_fraction_string(),
            Scalar::Approx(x) => format!("{x:?}"),
        }
    }
}

impl From<Rational> for Scalar {
    fn from(r: Rational) -> Self {
        Scalar::Exact(r)
    }
}
