//! Scalar traits the numerical core is written against.
//!
//! Term statistics only need ring arithmetic and ordering, so they are generic
//! over [`Scalar`], which admits exact rationals as well as floats. Everything
//! that exponentiates or takes logarithms is generic over [`Real`] (`f32`/`f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ring-like scalar with a total-enough order. Implemented for every numeric
/// type that satisfies the bounds, including `num_rational::BigRational`.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    /// `|self - other|` without requiring a signed-number trait.
    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    fn indicator(flag: bool) -> Self {
        if flag {
            Self::one()
        } else {
            Self::zero()
        }
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// Floating point: f32 or f64.
pub trait Real: Scalar + Float + ToPrimitive + Sum + Display + Default + Copy {
    /// Lossy conversion from an `f64` literal or draw.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable `ln(Σ exp(x_i))`.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let total: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + total.ln()
}

/// `ln(1 / (1 + e^{-x}))`, the log of the logistic function.
pub fn log_logistic<T: Real>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn logistic<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}
