//! Scalar abstraction so the whole toolkit can run on `f32` or `f64`.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type underlying all geometry and field arithmetic.
pub trait Scalar:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: RealField + FromPrimitive + ToPrimitive + Copy + Default + Send + Sync + 'static
{
}

/// Complex number over the generic scalar.
pub type C<T> = Complex<T>;

/// Converts an `f64` constant into the generic scalar.
#[inline]
pub fn s<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// Complex constant from a pair of `f64`s.
#[inline]
pub fn c<T: Scalar>(re: f64, im: f64) -> C<T> {
    Complex::new(s(re), s(im))
}

/// Converts the generic scalar back to `f64` (for formatting and counting).
#[inline]
pub fn fp<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar not representable as f64")
}

/// `exp(i a)` without requiring `num_traits::Float` on the scalar.
#[inline]
pub fn cis<T: Scalar>(a: T) -> C<T> {
    Complex::new(a.cos(), a.sin())
}

/// Complex magnitude via `norm_sqr` (avoids the `Float` bound of `norm`).
#[inline]
pub fn cabs<T: Scalar>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}
