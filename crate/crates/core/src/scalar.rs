//! Numeric traits the algorithms are generic over.
//!
//! [`Scalar`] is a real floating-point type (`f32`, `f64`) and backs the
//! optimizer, problem oracles and bound formulas. [`Field`] is the weaker
//! requirement of the variance closed forms and the enumeration oracle: exact
//! field arithmetic with an ordering, which admits arbitrary-precision
//! rationals as well as floats.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, Signed, ToPrimitive};

pub trait Scalar:
    Float + Signed + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + Signed
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

pub trait Field: Clone + Signed + FromPrimitive + ToPrimitive + PartialOrd + Debug {}

impl<T> Field for T where T: Clone + Signed + FromPrimitive + ToPrimitive + PartialOrd + Debug {}

/// Converts an `f64` constant into `S`.
#[inline]
pub fn lit<S: FromPrimitive>(x: f64) -> S {
    S::from_f64(x).expect("constant representable in scalar type")
}

/// Converts a count into any field type.
#[inline]
pub fn count<T: FromPrimitive>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Neumaier-compensated summation.
pub fn compensated_sum<T: Field, I: IntoIterator<Item = T>>(items: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in items {
        let t = sum.clone() + x.clone();
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t.clone()) + x);
        } else {
            comp = comp + ((x - t.clone()) + sum);
        }
        sum = t;
    }
    sum + comp
}
