//! Scalar abstraction shared by every construction in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, panicking only on non-representable input.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Relative tolerance used for "equal up to rounding" checks.
    fn rel_tol() -> Self;
}

impl Scalar for f32 {
    fn rel_tol() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn rel_tol() -> Self {
        1e-12
    }
}

/// `true` when `a` and `b` agree to `tol` relative to the larger magnitude,
/// or absolutely when both are tiny.
pub fn approx_eq<S: Scalar>(a: S, b: S, tol: S) -> bool {
    let scale = a.abs().max(b.abs()).max(S::one());
    (a - b).abs() <= tol * scale
}
