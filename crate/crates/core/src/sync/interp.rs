//! Cubic Farrow interpolator.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::waveform::DualPolWaveform;

/// Least-squares cubic Farrow coefficients. Row `k` gives the polynomial in
/// the fractional position `mu` for the tap at offset `k - 1`, so
/// `x(n + mu) = sum_k h_k(mu) x[n + k - 1]` for `mu` in `[0, 1)`.
const FARROW: [[f64; 4]; 4] = [
    [
        0.0,
        -0.432_209_426_663_953_3,
        0.644_730_326_308_507_2,
        -0.212_520_899_644_378_4,
    ],
    [
        1.0,
        -0.364_636_103_696_969_9,
        -1.254_193_735_235_262_3,
        0.618_829_838_931_461_9,
    ],
    [
        0.0,
        1.016_534_057_386_580_9,
        0.602_295_781_547_570_7,
        -0.618_829_838_933_635_5,
    ],
    [
        0.0,
        -0.219_688_527_020_163_9,
        0.007_167_627_365_925_704,
        0.212_520_899_655_158_3,
    ],
];

/// Tap weights for the four samples around a fractional position `mu`.
pub fn farrow_weights(mu: f64) -> [f64; 4] {
    FARROW.map(|c| ((c[3] * mu + c[2]) * mu + c[1]) * mu + c[0])
}

/// Circular interpolation of `s` at the fractional sample position `t`.
pub fn interpolate_at<T: Real>(s: &[Complex<T>], t: f64) -> Complex<T> {
    let n = s.len() as i64;
    let base = t.floor();
    let h = farrow_weights(t - base);
    let base = base as i64;
    let mut acc = Complex::new(T::zero(), T::zero());
    for (k, &hk) in h.iter().enumerate() {
        acc += s[(base + k as i64 - 1).rem_euclid(n) as usize] * T::lit(hk);
    }
    acc
}

/// `out[n] = s(n + offset)`, circularly.
pub fn shift_samples<T: Real>(s: &[Complex<T>], offset: f64) -> Vec<Complex<T>> {
    (0..s.len())
        .map(|n| interpolate_at(s, n as f64 + offset))
        .collect()
}

/// Delays both polarizations by `mu` samples: `y[n] = x(n - mu)`.
///
/// Evaluated circularly, so the output has no filter latency.
pub fn fractional_delay<T: Real>(w: &DualPolWaveform<T>, mu: f64) -> Result<DualPolWaveform<T>> {
    if !(mu.abs() <= 0.5) {
        return invalid(format!(
            "fractional delay must satisfy |mu| <= 0.5, got {mu}"
        ));
    }
    Ok(w.with_samples(shift_samples(&w.x, -mu), shift_samples(&w.y, -mu)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_interpolate_grid_points() {
        let h0 = farrow_weights(0.0);
        assert_eq!(h0, [0.0, 1.0, 0.0, 0.0]);
        let h1 = farrow_weights(1.0);
        for (a, b) in h1.iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-10);
        }
        for mu in [0.1, 0.37, 0.5, 0.9] {
            assert!((farrow_weights(mu).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tone_phase_shift() {
        let n = 256;
        let f = 0.2;
        let s: Vec<Complex<f64>> = (0..n)
            .map(|k| Complex::from_polar(1.0, 2.0 * PI * f * k as f64))
            .collect();
        let w = DualPolWaveform::new(s.clone(), s, 64e9, 32e9).unwrap();
        let d = fractional_delay(&w, 0.25).unwrap();
        let shift = (d.x[100] * w.x[100].conj()).arg();
        assert!((shift + 2.0 * PI * f * 0.25).abs() < 2e-3, "{shift}");
    }

    fn response(mu: f64, f: f64) -> Complex<f64> {
        farrow_weights(mu)
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex::from_polar(h, 2.0 * PI * f * (k as f64 - 1.0)))
            .sum()
    }

    #[test]
    fn delay_accuracy_in_band() {
        let (mut phase_err, mut group_err) = (0.0f64, 0.0f64);
        for i in 0..=50 {
            let mu = i as f64 / 50.0;
            for j in 1..=100 {
                let f = 0.2 * j as f64 / 100.0;
                phase_err = phase_err.max((response(mu, f).arg() / (2.0 * PI * f) - mu).abs());
                let df = 1e-6;
                let gd = (response(mu, f + df) / response(mu, f - df)).arg() / (4.0 * PI * df);
                group_err = group_err.max((gd - mu).abs());
            }
        }
        assert!(phase_err < 2.5e-3, "{phase_err}");
        assert!(group_err < 2.5e-2, "{group_err}");
    }

    #[test]
    fn two_half_sample_delays_match_one_sample() {
        let n = 512;
        let (f1, f2) = (3.0 / n as f64, 57.0 / n as f64);
        let s: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let t = k as f64;
                Complex::new((2.0 * PI * f1 * t).cos(), (2.0 * PI * f2 * t).sin())
            })
            .collect();
        let w = DualPolWaveform::new(s.clone(), s, 64e9, 32e9).unwrap();
        let d = fractional_delay(&fractional_delay(&w, 0.5).unwrap(), 0.5).unwrap();
        // Each tone of amplitude 1/2 per sign of frequency picks up the
        // deviation of the squared half-sample response from a full sample.
        let bound: f64 = [f1, f2]
            .iter()
            .map(|&f| {
                let dev = |f: f64| {
                    (response(0.5, f).powi(2) - Complex::from_polar(1.0, 2.0 * PI * f)).norm()
                };
                0.5 * (dev(f) + dev(-f))
            })
            .sum();
        for k in 0..n {
            let err = (d.x[k] - w.x[(k + n - 1) % n]).norm();
            assert!(err <= bound + 1e-12, "{err} > {bound}");
        }
    }

    #[test]
    fn identity_at_zero() {
        let s: Vec<Complex<f64>> = (0..64)
            .map(|k| Complex::new(k as f64, -(k as f64)))
            .collect();
        let w = DualPolWaveform::new(s.clone(), s, 64e9, 32e9).unwrap();
        assert_eq!(fractional_delay(&w, 0.0).unwrap().x, w.x);
        assert!(fractional_delay(&w, 0.6).is_err());
    }
}
