//! Thin wrappers over `rustfft` with the conventions used throughout the crate:
//! forward `X[k] = sum_n x[n] e^{-j 2 pi k n / N}`, inverse scaled by `1/N`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward and inverse plans for one transform length.
pub struct FftPair<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    n: usize,
}

impl<T: Real> FftPair<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.n);
        self.fwd.process(buf);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inv.process(buf);
        let s = T::one() / T::lit(self.n as f64);
        for z in buf.iter_mut() {
            *z = *z * s;
        }
    }
}

pub fn forward<T: Real>(data: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = data.to_vec();
    FftPair::new(buf.len()).forward(&mut buf);
    buf
}

pub fn inverse<T: Real>(data: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = data.to_vec();
    FftPair::new(buf.len()).inverse(&mut buf);
    buf
}

/// Signed frequency of bin `k` for a length-`n` transform at `sample_rate`.
#[inline]
pub fn bin_freq(k: usize, n: usize, sample_rate: f64) -> f64 {
    let ks = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    ks * sample_rate / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_bins() {
        let x: Vec<Complex<f64>> = (0..16)
            .map(|i| Complex::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let back = inverse(&forward(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(bin_freq(3, 16, 16.0), 3.0);
        assert_eq!(bin_freq(8, 16, 16.0), -8.0);
        assert_eq!(bin_freq(15, 16, 16.0), -1.0);
    }
}
