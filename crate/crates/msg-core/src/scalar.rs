//! Scalar abstraction for the numeric core.
//!
//! Everything under [`crate::autodiff`] and [`crate::dsp`] is generic over
//! [`Scalar`] so the same kernels run in f32 or f64. The training pipeline
//! pins f64 through the crate-root aliases; checkpoints store f32 payloads.

use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};
use rustfft::FftNum;

/// Floating-point scalar usable by the array engine and the DSP kernels.
pub trait Scalar:
    Float + NumAssignOps + FftNum + Sum + Default + Display + Send + Sync
{
    /// Conversion from f64 (exact for f64, rounded for f32).
    fn of_f64(value: f64) -> Self;

    /// Widening conversion to f64 (exact for both supported types).
    fn as_f64(self) -> f64;

    /// Conversion from usize, used for normalization factors like 1/n.
    fn of_usize(value: usize) -> Self {
        Self::of_f64(value as f64)
    }
}

impl Scalar for f32 {
    fn of_f64(value: f64) -> Self {
        value as f32
    }

    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn of_f64(value: f64) -> Self {
        value
    }

    fn as_f64(self) -> f64 {
        self
    }
}
