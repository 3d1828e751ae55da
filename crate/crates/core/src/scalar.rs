//! Scalar abstractions shared by the numeric parts of the toolkit.
//!
//! Geometry (spacing, world coordinates) is always `f64`. Everything that
//! produces a real-valued result (distances, centroids, window weights,
//! statistics) is generic over [`Real`], and overlap ratios additionally
//! accept exact rationals through [`OverlapScalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::infinity)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Result type of a count ratio such as Dice or IoU.
///
/// Implemented for the float types and for `Ratio<u64>`, which keeps the
/// value exact.
pub trait OverlapScalar: Clone + PartialEq + PartialOrd + Debug {
    /// `num / den`; `den` is never zero at call sites.
    fn ratio(num: u64, den: u64) -> Self;
}

impl OverlapScalar for f32 {
    fn ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl OverlapScalar for f64 {
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl OverlapScalar for Ratio<u64> {
    fn ratio(num: u64, den: u64) -> Self {
        Ratio::new(num, den)
    }
}
