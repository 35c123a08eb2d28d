//! Scalar abstraction for sample data and 2x2 matrix arithmetic.
//!
//! Physical metadata (sample rates, delays, DGD) always stays `f64`; only the
//! signal samples and the Jones/cyclic matrices are generic. Phases of the form
//! `2*pi*f*t` are accumulated in `f64` and converted at the end, so `f32`
//! sample storage does not lose timing precision over long records.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, RemAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar usable for samples, spectra and Jones matrices (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + RemAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite scalar")
    }

    /// Tolerance used when validating unit-norm invariants at this precision.
    #[inline]
    fn unit_tol() -> Self {
        Self::epsilon() * Self::lit(1024.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{j*phase}` with the phase evaluated in `f64`.
#[inline]
pub fn cis<T: Real>(phase: f64) -> Complex<T> {
    Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
}

#[inline]
pub fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(phase: f64) -> f64 {
    use std::f64::consts::PI;
    if phase > -PI && phase <= PI {
        return phase;
    }
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Wraps a timing phase in unit intervals into `[-0.5, 0.5)`.
pub fn wrap_ui(ui: f64) -> f64 {
    (ui + 0.5).rem_euclid(1.0) - 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_pi_range() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(0.25) - 0.25).abs() < 1e-15);
        assert!((wrap_pi(-0.25 - 2.0 * PI) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn wrap_ui_range() {
        assert_eq!(wrap_ui(0.5), -0.5);
        assert!((wrap_ui(0.75) + 0.25).abs() < 1e-15);
        assert!((wrap_ui(-1.2) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(0.1).as_f64(), 0.1);
        assert!(f32::unit_tol() > f64::unit_tol() as f32);
    }
}
