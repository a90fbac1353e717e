//! Integer scalar abstraction for energies, costs, and matrix coefficients.
//!
//! The whole model is an integer program: every quantity (arc energy, state of
//! charge, constraint coefficient) is an exact integer. Core types are generic
//! over [`EnergyScalar`] so the same code runs on `i32`, `i64`, or `i128`;
//! the crate root exports concrete aliases for the default `i64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{NumAssign, NumCast, PrimInt, Signed};

/// Signed integer scalar used for all energy and cost arithmetic.
pub trait EnergyScalar:
    PrimInt + Signed + NumAssign + Sum<Self> + Display + Debug + Send + Sync + 'static
{
    /// Lossless conversion from a small literal. Panics only if the target
    /// type cannot hold the value (e.g. an `i32` scalar fed > 2^31).
    fn of(value: i64) -> Self {
        NumCast::from(value).expect("energy literal out of range for scalar type")
    }

    /// Widening conversion used by dimension formulas and reports.
    fn to_i64(self) -> i64 {
        NumCast::from(self).expect("energy value out of range for i64")
    }
}

impl EnergyScalar for i32 {}
impl EnergyScalar for i64 {}
impl EnergyScalar for i128 {
    fn to_i64(self) -> i64 {
        NumCast::from(self).expect("energy value out of range for i64")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversions_round_trip() {
        assert_eq!(i32::of(42).to_i64(), 42);
        assert_eq!(i64::of(-7), -7i64);
        assert_eq!(i128::of(1 << 40).to_i64(), 1i64 << 40);
    }
}
