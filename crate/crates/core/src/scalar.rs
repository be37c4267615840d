//! Scalar abstraction.
//!
//! Every numerical routine is written against [`Scalar`], which is implemented
//! for `f32`, `f64`, `Complex<f32>` and `Complex<f64>`. Real scalars are enough
//! for the classical-model construction; general PEPS need complex entries.

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Real field underlying a [`Scalar`].
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Relative singular-value tolerance used when the caller gives none.
    fn default_rtol() -> Self;

    /// Machine epsilon.
    fn epsilon() -> Self;
}

impl Real for f64 {
    fn default_rtol() -> Self {
        1e-10
    }

    fn epsilon() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn default_rtol() -> Self {
        1e-4
    }

    fn epsilon() -> Self {
        f32::EPSILON
    }
}

/// Field of tensor entries.
pub trait Scalar: ComplexField<RealField: Real> + Copy {
    /// Whether the imaginary part is representable.
    const IS_COMPLEX: bool;

    /// Builds a value from its real and imaginary parts. Real scalars drop `im`.
    fn from_parts(re: Self::RealField, im: Self::RealField) -> Self;

    /// Real and imaginary parts.
    fn parts(self) -> (Self::RealField, Self::RealField) {
        (self.real(), self.imaginary())
    }

    /// A standard Gaussian sample (complex samples have unit total variance).
    fn gaussian<G: Rng + ?Sized>(rng: &mut G) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        if Self::IS_COMPLEX {
            let im: f64 = rng.sample(StandardNormal);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Self::from_parts(real(re * s), real(im * s))
        } else {
            Self::from_parts(real(re), real(0.0))
        }
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for f32 {
    const IS_COMPLEX: bool = false;
    fn from_parts(re: f32, _im: f32) -> Self {
        re
    }
}

impl Scalar for Complex<f64> {
    const IS_COMPLEX: bool = true;
    fn from_parts(re: f64, im: f64) -> Self {
        Complex::new(re, im)
    }
}

impl Scalar for Complex<f32> {
    const IS_COMPLEX: bool = true;
    fn from_parts(re: f32, im: f32) -> Self {
        Complex::new(re, im)
    }
}

/// Real field of a scalar type.
pub type RealOf<K> = <K as ComplexField>::RealField;

/// Converts an `f64` literal into any real field.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    nalgebra::convert(x)
}

/// Converts an `f64` literal into any scalar.
#[inline]
pub fn lit<K: Scalar>(x: f64) -> K {
    nalgebra::convert(x)
}

/// Lossy conversion of a real back to `f64`, for reports.
#[inline]
pub fn to_f64<R: Real>(x: R) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
