//! Scalar and matrix-entry abstractions.
//!
//! Everything numeric in the crate is generic over [`Real`] (implemented for
//! `f32` and `f64`). Dense operators are generic over [`Entry`], which is
//! either the real scalar itself (real symmetric matrices) or
//! `Complex<T>` (Hermitian matrices).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    faer::traits::RealField
    + Float
    + FromPrimitive
    + ToPrimitive
    + Copy
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + NumAssign
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Entry type of a dense Hermitian operator over the real scalar `T`.
pub trait Entry<T: Real>:
    faer::traits::ComplexField<Real = T>
    + Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn from_re(x: T) -> Self;
    /// `i^pow * x`, or `None` if the result is not representable (an
    /// imaginary value in a real field).
    fn from_phase(pow: u8, x: T) -> Option<Self>;
    fn re(self) -> T;
    fn im(self) -> T;
    fn conjugate(self) -> Self;
    fn norm_sqr(self) -> T;
    fn scale(self, s: T) -> Self;
    fn to_complex(self) -> Complex<T>;
    /// Drops the imaginary part for real fields.
    fn from_complex(c: Complex<T>) -> Self;

    #[inline]
    fn abs(self) -> T {
        self.norm_sqr().sqrt()
    }
}

impl<T: Real> Entry<T> for T {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn zero() -> Self {
        T::zero()
    }
    #[inline]
    fn from_re(x: T) -> Self {
        x
    }
    #[inline]
    fn from_phase(pow: u8, x: T) -> Option<Self> {
        match pow & 3 {
            0 => Some(x),
            2 => Some(-x),
            _ => None,
        }
    }
    #[inline]
    fn re(self) -> T {
        self
    }
    #[inline]
    fn im(self) -> T {
        T::zero()
    }
    #[inline]
    fn conjugate(self) -> Self {
        self
    }
    #[inline]
    fn norm_sqr(self) -> T {
        self * self
    }
    #[inline]
    fn scale(self, s: T) -> Self {
        self * s
    }
    #[inline]
    fn to_complex(self) -> Complex<T> {
        Complex::new(self, T::zero())
    }
    #[inline]
    fn from_complex(c: Complex<T>) -> Self {
        c.re
    }
}

impl<T: Real> Entry<T> for Complex<T> {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    #[inline]
    fn from_re(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    #[inline]
    fn from_phase(pow: u8, x: T) -> Option<Self> {
        let z = T::zero();
        Some(match pow & 3 {
            0 => Complex::new(x, z),
            1 => Complex::new(z, x),
            2 => Complex::new(-x, z),
            _ => Complex::new(z, -x),
        })
    }
    #[inline]
    fn re(self) -> T {
        self.re
    }
    #[inline]
    fn im(self) -> T {
        self.im
    }
    #[inline]
    fn conjugate(self) -> Self {
        self.conj()
    }
    #[inline]
    fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }
    #[inline]
    fn scale(self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
    #[inline]
    fn to_complex(self) -> Complex<T> {
        self
    }
    #[inline]
    fn from_complex(c: Complex<T>) -> Self {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_in_real_field() {
        assert_eq!(<f64 as Entry<f64>>::from_phase(0, 2.0), Some(2.0));
        assert_eq!(<f64 as Entry<f64>>::from_phase(2, 2.0), Some(-2.0));
        assert_eq!(<f64 as Entry<f64>>::from_phase(1, 2.0), None);
        assert_eq!(<f32 as Entry<f32>>::from_phase(6, 1.0), Some(-1.0));
    }

    #[test]
    fn phases_in_complex_field() {
        let c = <Complex<f64> as Entry<f64>>::from_phase(3, 1.0).unwrap();
        assert_eq!(c, Complex::new(0.0, -1.0));
        assert_eq!(c.conjugate(), Complex::new(0.0, 1.0));
        assert_eq!(c.norm_sqr(), 1.0);
    }
}
