use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Ordered field usable by the simplex engine.
///
/// `f64` trades exactness for speed and compares with a small tolerance;
/// `BigRational` is exact and compares with zero tolerance.
pub trait LpScalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static
{
    /// Magnitude below which a value counts as zero.
    fn zero_tolerance() -> Self;

    /// Slack allowed when testing bound feasibility.
    fn feasibility_tolerance() -> Self;

    /// Distance from an integer still treated as integral.
    fn integrality_tolerance() -> Self;

    fn floor(&self) -> Self;

    fn ceil(&self) -> Self;

    fn to_f64(&self) -> f64;

    /// True when the scalar is exact and never accumulates rounding error.
    fn is_exact() -> bool;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::zero_tolerance()
    }

    fn from_i64_lossless(v: i64) -> Self {
        Self::from_i64(v).expect("integer is representable")
    }

    /// Distance to the nearest integer.
    fn fractionality(&self) -> Self {
        let down = self.clone() - self.floor();
        let up = self.ceil() - self.clone();
        if down < up {
            down
        } else {
            up
        }
    }

    fn is_integral(&self) -> bool {
        self.fractionality() <= Self::integrality_tolerance()
    }

    fn round_to_integer(&self) -> Self {
        let half = Self::one() / (Self::one() + Self::one());
        (self.clone() + half).floor()
    }
}

impl LpScalar for f64 {
    fn zero_tolerance() -> Self {
        1e-11
    }

    fn feasibility_tolerance() -> Self {
        1e-8
    }

    fn integrality_tolerance() -> Self {
        1e-6
    }

    fn floor(&self) -> Self {
        f64::floor(*self)
    }

    fn ceil(&self) -> Self {
        f64::ceil(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }
}

impl LpScalar for BigRational {
    fn zero_tolerance() -> Self {
        Self::zero()
    }

    fn feasibility_tolerance() -> Self {
        Self::zero()
    }

    fn integrality_tolerance() -> Self {
        Self::zero()
    }

    fn floor(&self) -> Self {
        BigRational::floor(self)
    }

    fn ceil(&self) -> Self {
        BigRational::ceil(self)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            if self.is_positive() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
    }

    fn is_exact() -> bool {
        true
    }

    fn from_i64_lossless(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// Converts an `f64` literal into the scalar; exact for dyadic rationals.
pub fn scalar_from_f64<T: LpScalar>(v: f64) -> T {
    T::from_f64(v).expect("finite value")
}
