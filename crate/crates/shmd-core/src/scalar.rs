//! Scalar abstraction for the floating-point side of the pipeline.
//!
//! Training, prediction, input gradients, metrics and bound arithmetic are
//! generic over [`Scalar`] so the same code instantiates at `f32` and `f64`.
//! The fixed-point inference lane is deliberately *not* generic: it operates
//! on raw `i32`/`i64` bit patterns and lives in [`crate::vos`].

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the model and evaluation code.
///
/// All randomness is drawn as `f64` and converted through [`Scalar::from_f64_lossy`],
/// so seeded runs draw identical streams regardless of the instantiation.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Convert from `f64`, rounding to the nearest representable value.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 is representable in every Scalar impl")
    }

    /// Widen to `f64` (exact for `f32` and `f64`).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable logistic function, usable at extreme inputs.
pub fn logistic<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}
