//! Scalar abstractions shared by the solvers.
//!
//! [`Scalar`] only asks for ordered-field arithmetic, so it covers `f32`, `f64`
//! and exact [`BigRational`]. The LP solver and the payment rule are written
//! against it. Anything that needs `powf`, `sqrt` or a continuous line search
//! asks for [`Real`] instead.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Num, Signed, ToPrimitive, Zero};

pub trait Scalar: Clone + PartialOrd + Debug + Display + Num + Signed + Send + Sync + 'static {
    /// Converts an `f64` literal or input value. Exact types take the binary
    /// value of the float exactly.
    fn cast(x: f64) -> Self;

    fn to_f64_lossy(&self) -> f64;

    /// Returns `eps` for inexact types and zero for exact ones.
    fn tolerance(eps: f64) -> Self;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn cast(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
    fn tolerance(eps: f64) -> Self {
        eps
    }
}

impl Scalar for f32 {
    fn cast(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(&self) -> f64 {
        f64::from(*self)
    }
    fn tolerance(eps: f64) -> Self {
        // Tolerances below f32 resolution would never be met.
        (eps as f32).max(f32::EPSILON * 16.0)
    }
}

impl Scalar for BigRational {
    fn cast(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| panic!("non-finite value {x} cannot be made exact"))
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or_else(|| {
            let num = self.numer().to_f64().unwrap_or(f64::NAN);
            let den = self.denom().to_f64().unwrap_or(f64::NAN);
            num / den
        })
    }
    fn tolerance(_eps: f64) -> Self {
        BigRational::zero()
    }
}

/// Continuous scalar used by cost functions, equilibrium solvers and VOT
/// distributions.
pub trait Real: Scalar + Float + Copy + Default {}

impl<T: Scalar + Float + Copy + Default> Real for T {}

/// Exact rational built from an integer numerator and denominator.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::cast(x)
}

pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::cast(n as f64)
}
