//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Everything that touches sample data is generic over [`Real`], which is
//! implemented for `f32` and `f64`. Metadata (frequencies, rates, seeds)
//! stays in `f64` regardless of the sample type.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point sample type: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or metadata value.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a complex vector.
pub fn norm2<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Sum of complex moduli.
pub fn norm1<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm())
}

pub fn energy<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Hermitian inner product `<a, b> = sum conj(a_i) b_i`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// `||a - b||_2`
pub fn dist2<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + (x - y).norm_sqr())
        .sqrt()
}

/// Soft-thresholding on the complex modulus; phase is preserved.
#[inline]
pub fn soft_threshold<T: Real>(z: Complex<T>, kappa: T) -> Complex<T> {
    let r = z.norm();
    if r <= kappa {
        Complex::new(T::zero(), T::zero())
    } else {
        z * ((r - kappa) / r)
    }
}

pub fn zeros<T: Real>(n: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::zero(), T::zero()); n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_keeps_phase() {
        let z = Complex::new(3.0f64, 4.0);
        let s = soft_threshold(z, 1.0);
        assert!((s.norm() - 4.0).abs() < 1e-12);
        assert!((s.arg() - z.arg()).abs() < 1e-12);
        assert_eq!(soft_threshold(z, 5.0), Complex::new(0.0, 0.0));
    }

    #[test]
    fn norms_agree_on_simple_vectors() {
        let v = vec![Complex::new(3.0f32, 4.0), Complex::new(0.0, 0.0)];
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(norm1(&v), 5.0);
        assert_eq!(inner(&v, &v).re, 25.0);
    }
}
