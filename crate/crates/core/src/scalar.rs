//! Scalar abstraction shared by every numeric module.
//!
//! The simulator is written once over [`Real`] and instantiated for `f64`
//! (the default used by the runner) and `f32`. Tolerances are specified in
//! `f64` and widened to the precision floor of the concrete type with
//! [`Real::tol`].

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real field usable as the scalar of density matrices and channels.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Default + Send + Sync + 'static
{
    /// Machine epsilon of the concrete type, as `f64`.
    const MACHINE_EPS: f64;

    /// Converts an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion back to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance of `t`, floored at a few thousand ulps of the type.
    #[inline]
    fn tol(t: f64) -> Self {
        Self::of(t.max(4096.0 * Self::MACHINE_EPS))
    }
}

impl Real for f64 {
    const MACHINE_EPS: f64 = f64::EPSILON;
}

impl Real for f32 {
    const MACHINE_EPS: f64 = f32::EPSILON as f64;
}

/// Complex number over a [`Real`].
pub type C<T> = Complex<T>;

#[inline]
pub fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::of(re), T::of(im))
}

#[inline]
pub fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// Modulus `|z|`.
#[inline]
pub fn modulus<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

/// Complex exponential.
#[inline]
pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    let r = z.re.exp();
    Complex::new(r * z.im.cos(), r * z.im.sin())
}

/// `e^{iφ}`.
#[inline]
pub fn phase<T: Real>(phi: T) -> C<T> {
    Complex::new(phi.cos(), phi.sin())
}
