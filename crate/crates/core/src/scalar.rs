//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar the crate is generic over (`f32` or `f64`).
///
/// Automatically implemented for every type satisfying the super-traits.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_pi<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let mut x = (a + T::PI()) % two_pi;
    if x < T::zero() {
        x += two_pi;
    }
    x - T::PI()
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_2pi<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let mut x = a % two_pi;
    if x < T::zero() {
        x += two_pi;
    }
    if x >= two_pi {
        x -= two_pi;
    }
    x
}

/// Absolute angular difference wrapped into `[0, pi]`.
pub fn angle_diff<T: Real>(a: T, b: T) -> T {
    wrap_pi(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert!((wrap_pi(3.0 * std::f64::consts::PI) + std::f64::consts::PI).abs() < 1e-12);
        assert!(wrap_2pi(-0.5f64) > 0.0);
        assert!((angle_diff(350f64.to_radians(), 10f64.to_radians()) - 20f64.to_radians()).abs() < 1e-12);
        assert!((wrap_2pi(-1e-20f32)) < std::f32::consts::TAU);
    }
}
