//! Scalar abstraction for the physics substrate.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real field usable by the simulator: `f32` or `f64`.
pub trait Real: RealField + Copy + Default + FromPrimitive + ToPrimitive + FloatConst + Send + Sync {}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).unwrap()
}

/// Convert back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap()
}

#[inline]
pub fn is_nan<T: Real>(x: T) -> bool {
    x.to_f64().is_none_or(f64::is_nan)
}

/// Complex number from `f64` parts.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(lit(re), lit(im))
}

/// `e^{iφ}`.
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

/// Modulus without relying on `num_traits::Float`.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// Argument of `z` in (−π, π].
#[inline]
pub fn arg<T: Real>(z: Complex<T>) -> T {
    z.im.atan2(z.re)
}

/// Tolerance floor adapted to the precision of `T`: `max(tol, 64·ε_T)`.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    let floor = T::default_epsilon() * lit(64.0);
    let t = lit::<T>(x);
    if t > floor {
        t
    } else {
        floor
    }
}
