//! Scalar abstraction so the analytical core runs on f32 or f64.
//!
//! All graph, feature and model math is generic over [`Scalar`]; the pipeline
//! and the file formats pin `f64` through the aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used by the graph and detection math.
pub trait Scalar:
    Float
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, used for constants and configuration values.
    fn of(x: f64) -> Self;

    /// Widening conversion to `f64`, used for reporting and serialization.
    fn to64(self) -> f64;

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn of_u64(n: u64) -> Self {
        Self::of(n as f64)
    }

    /// Smallest representable step above `x`; used for "just above" thresholds.
    fn just_above(x: Self) -> Self {
        if x == Self::zero() {
            return Self::min_positive_value();
        }
        let four = Self::of(4.0);
        x + x.abs() * Self::epsilon() * four
    }
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }

    fn to64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }

    fn to64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5).to64(), 1.5);
        assert_eq!(f32::of(1.5).to64(), 1.5);
        assert_eq!(f64::of_usize(7), 7.0);
    }

    #[test]
    fn just_above_is_strictly_greater() {
        for x in [0.0_f64, 1.0, 1e-12, 37.25, 1e9] {
            assert!(f64::just_above(x) > x);
        }
        assert!(f32::just_above(2.0_f32) > 2.0);
    }
}
