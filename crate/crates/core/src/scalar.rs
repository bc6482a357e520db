//! Scalar abstraction shared by the kinematics, control and manager code.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for both supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamps `v` into `[-limit, limit]`.
#[inline]
pub fn clamp_abs<T: Scalar>(v: T, limit: T) -> T {
    v.max(-limit).min(limit)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r <= -T::PI() {
        r += two_pi;
    } else if r > T::PI() {
        r -= two_pi;
    }
    r
}

/// Folds an angle into `(-pi/2, pi/2]`, i.e. identifies directions that differ by pi.
pub fn fold_half_turn<T: Scalar>(a: T) -> T {
    let mut r = normalize_angle(a);
    if r > T::FRAC_PI_2() {
        r -= T::PI();
    } else if r <= -T::FRAC_PI_2() {
        r += T::PI();
    }
    r
}
