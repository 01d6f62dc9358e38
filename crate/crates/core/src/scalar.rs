//! Scalar abstractions shared by every numerical routine in the crate.
//!
//! Two tiers exist. [`Scalar`] is a field: enough for rate bookkeeping,
//! ergodicity coefficients, residuals and dense linear solves, and it is
//! implemented for exact rationals as well as for floats. [`Real`] adds
//! the transcendental functions needed by semigroups, ODE integration and
//! simulation, and is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num
    + Neg<Output = Self>
    + Clone
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance on `|sum - 1|` for a vector to count as a probability.
    const SUM_TOL: f64;

    /// Absolute value.
    fn magnitude(&self) -> Self;

    /// `false` for NaN and infinities; always `true` for exact types.
    fn is_finite_value(&self) -> bool {
        true
    }

    /// Conversion from a literal. Panics only for non-finite input.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| panic!("{v} is not representable"))
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    /// Lossy view used for reporting.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

pub trait Real: Scalar + Float + Copy {}

impl Scalar for f64 {
    const SUM_TOL: f64 = 1e-12;
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    const SUM_TOL: f64 = 1e-5;
    fn magnitude(&self) -> Self {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    const SUM_TOL: f64 = 0.0;
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
}

impl Real for f64 {}
impl Real for f32 {}

pub(crate) fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn min_of<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_literals_are_exact() {
        let half = BigRational::lit(0.5);
        assert_eq!(half.clone() + half, BigRational::lit(1.0));
        assert_eq!(BigRational::lit(-3.0).magnitude(), BigRational::lit(3.0));
    }

    #[test]
    fn float_finiteness() {
        assert!(!f64::NAN.is_finite_value());
        assert!(1.0f32.is_finite_value());
        assert_eq!(max_of(1.0, 2.0), 2.0);
        assert_eq!(min_of(1.0, 2.0), 1.0);
    }
}
