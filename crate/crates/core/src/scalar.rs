//! Scalar abstraction shared by the network algebra.
//!
//! Everything that is pure complex algebra (port reduction, tee construction,
//! Gell-Mann perturbations, closed-form lineshapes, circle fitting) is generic
//! over [`Real`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for building complex constants in generic code.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// `exp(i * theta)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut x = theta % two_pi;
    if x <= -T::PI() {
        x += two_pi;
    } else if x > T::PI() {
        x -= two_pi;
    }
    x
}

/// Amplitude in decibels, `20 log10 |z|`.
#[inline]
pub fn db20<T: Real>(magnitude: T) -> T {
    T::lit(20.0) * magnitude.log10()
}
