//! Brute-force reference implementations. They are quadratic in the block
//! length and exist to cross-check the fast paths (tests and `selftest`).

use std::f64::consts::PI;

use num_complex::Complex;

use crate::jones::Mat2;
use crate::scalar::Real;

type C = Complex<f64>;

fn widen<T: Real>(s: &[Complex<T>]) -> Vec<C> {
    s.iter()
        .map(|z| C::new(z.re.as_f64(), z.im.as_f64()))
        .collect()
}

/// Circular cyclic autocorrelation matrix by direct summation, lags
/// `m` in `[-N/2, N/2)`:
/// `R_rc[m] = (1/N) sum_n s_r[(n+m) mod N] conj(s_c[n]) e^{-j 2 pi alpha (n + m/2) Ts}`.
pub fn caf_direct<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
) -> Vec<Mat2<f64>> {
    let s = [widen(x), widen(y)];
    let n = x.len();
    let ts = 1.0 / sample_rate;
    let half = (n / 2) as i64;
    (-half..half)
        .map(|m| {
            let mut acc = [[C::default(); 2]; 2];
            for t in 0..n {
                let shifted = (t as i64 + m).rem_euclid(n as i64) as usize;
                let ph = C::from_polar(1.0, -2.0 * PI * alpha * (t as f64 + m as f64 / 2.0) * ts);
                for r in 0..2 {
                    for c in 0..2 {
                        acc[r][c] += s[r][shifted] * s[c][t].conj() * ph;
                    }
                }
            }
            let k = 1.0 / n as f64;
            Mat2::new(acc[0][0] * k, acc[0][1] * k, acc[1][0] * k, acc[1][1] * k)
        })
        .collect()
}

/// Dual-polarization square-law clock tone
/// `(1/N) sum_n (|x[n]|^2 + |y[n]|^2) e^{-j 2 pi alpha n Ts}`.
pub fn square_tone_direct<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
) -> C {
    let n = x.len();
    let mut acc = C::default();
    for t in 0..n {
        let p = (x[t].norm_sqr() + y[t].norm_sqr()).as_f64();
        acc += C::from_polar(p, -2.0 * PI * alpha * t as f64 / sample_rate);
    }
    acc / n as f64
}

/// Naive DFT `X[k] = sum_n x[n] e^{-j 2 pi k n / N}`.
pub fn dft_direct<T: Real>(x: &[Complex<T>]) -> Vec<C> {
    let n = x.len();
    let xs = widen(x);
    (0..n)
        .map(|k| {
            xs.iter()
                .enumerate()
                .map(|(t, &v)| v * C::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Direct evaluation of the band-averaged cyclic matrix at delay `tau` from
/// a naive DFT: `(1/|B|) sum_{i in B} E1 E2^H / N e^{j 2 pi f_i tau}` with the
/// same bin pairing as the fast estimator.
pub fn cyclic_matrix_direct<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
    half_band: f64,
    tau: f64,
) -> Mat2<f64> {
    let n = x.len();
    let (xf, yf) = (dft_direct(x), dft_direct(y));
    let b = (alpha * n as f64 / sample_rate).round() as i64;
    let h = b / 2;
    let mut acc = Mat2::<f64>::zero();
    let mut count = 0usize;
    for i in -(n as i64 / 2)..(n as i64 / 2) {
        let f = (i as f64 + (b - 2 * h) as f64 / 2.0) * sample_rate / n as f64;
        if f.abs() > half_band * alpha * (1.0 + 1e-12) {
            continue;
        }
        let k1 = (i - h + b).rem_euclid(n as i64) as usize;
        let k2 = (i - h).rem_euclid(n as i64) as usize;
        let p = Mat2::outer([xf[k1], yf[k1]], [xf[k2], yf[k2]]).scale_re(1.0 / n as f64);
        acc = acc + p.scale(C::from_polar(1.0, 2.0 * PI * f * tau));
        count += 1;
    }
    acc.scale_re(1.0 / count.max(1) as f64)
}

/// Brute-force eigenvalues of a 2x2 matrix by scanning the characteristic
/// polynomial roots with the quadratic formula in `f64`.
pub fn eigenvalues_direct(m: &Mat2<f64>) -> [C; 2] {
    let tr = m.trace();
    let det = m.det();
    let disc = (tr * tr - det * 4.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}
