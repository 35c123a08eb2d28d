//! Second-order cyclic statistics at the baud rate.
//!
//! For a block of `N` samples with spectrum `X[k]` the cyclic frequency
//! `alpha` must be an exact multiple `b` of the bin spacing `fs/N`. With
//! `h = floor(b/2)`, the periodogram at index `i` in `[-N/2, N/2)` pairs bins
//!
//! ```text
//! E1 = [X; Y][i - h + b],   E2 = [X; Y][i - h],   f_i = (i + (b - 2h)/2) fs/N
//! P'(f_i) = E1 E2^H / N
//! ```
//!
//! so `E1` sits at `f_i + alpha/2` and `E2` at `f_i - alpha/2`. The cyclic
//! autocorrelation on the lag grid `m` in `[-N/2, N/2)` is
//! `R[m] = (1/N) sum_i P'(f_i) e^{j 2 pi f_i m Ts}`, which equals the
//! circular time-domain sum
//! `(1/N) sum_n x[n+m] x*[n] e^{-j 2 pi alpha (n + m/2) Ts}` exactly.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::fft::FftPair;
use crate::jones::Mat2;
use crate::scalar::{cis, Real};
use crate::waveform::DualPolWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            Window::Rectangular => None,
            Window::Hann => Some(
                (0..n)
                    .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                    .collect(),
            ),
        }
    }
}

/// Frequency range over which the periodogram is integrated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Band {
    /// Every bin of the block.
    Full,
    /// `|f| <= fraction * alpha`.
    Fraction(f64),
}

impl Band {
    /// Overlap of the pulse spectra at `f +- alpha/2`: `|f| < rolloff/2 * alpha`.
    pub fn for_rolloff(rolloff: f64) -> Self {
        Band::Fraction(rolloff / 2.0)
    }

    fn contains(&self, f: f64, alpha: f64) -> bool {
        match *self {
            Band::Full => true,
            Band::Fraction(h) => f.abs() <= h * alpha * (1.0 + 1e-12),
        }
    }
}

/// How the band average is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Raw average `(1/N) sum P'(f) e^{j 2 pi f tau}`.
    None,
    /// Divided by the band average of `||E1|| ||E2|| / (2N)`, so that an
    /// undistorted signal gives `e^{-j phi0} I` independent of power.
    #[default]
    Band,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CyclicConfig {
    pub band: Band,
    pub window: Window,
    pub normalization: Normalization,
}

impl Default for CyclicConfig {
    fn default() -> Self {
        Self::for_rolloff(0.1)
    }
}

impl CyclicConfig {
    pub fn for_rolloff(rolloff: f64) -> Self {
        Self {
            band: Band::for_rolloff(rolloff),
            window: Window::Rectangular,
            normalization: Normalization::Band,
        }
    }
}

/// Frequency-averaged cyclic correlation matrix, i.e. `C(tau)` at one delay.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicMatrixEstimate<T> {
    pub m: Mat2<T>,
    pub alpha: f64,
    /// Delay used for the linear-phase de-rotation, s.
    pub tau: f64,
    pub n_blocks: usize,
    /// Band-average normalization constant (1 when unnormalized).
    pub strength: f64,
}

impl<T: Real> CyclicMatrixEstimate<T> {
    pub fn new(m: Mat2<T>, alpha: f64) -> Self {
        Self {
            m,
            alpha,
            tau: 0.0,
            n_blocks: 1,
            strength: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() {
            return Err(Error::Numerical("non-finite cyclic matrix".into()));
        }
        if self.n_blocks == 0 {
            return invalid("cyclic matrix estimate needs at least one block");
        }
        Ok(())
    }
}

/// Bin offset `b = alpha N / fs`, rejecting off-grid cyclic frequencies.
pub fn cyclic_bin(n: usize, alpha: f64, sample_rate: f64) -> Result<usize> {
    let df = sample_rate / n as f64;
    let b = alpha / df;
    if !(b > 0.0) || (b - b.round()).abs() > 1e-9 * b.max(1.0) || b.round() as usize >= n {
        return Err(Error::OffGrid { alpha, bin: df });
    }
    Ok(b.round() as usize)
}

fn check_block<T>(x: &[Complex<T>], y: &[Complex<T>]) -> Result<usize> {
    if x.len() != y.len() {
        return invalid("block polarizations differ in length");
    }
    let n = x.len();
    if n < 4 || !n.is_power_of_two() {
        return invalid(format!("block length must be a power of two >= 4, got {n}"));
    }
    Ok(n)
}

/// Cyclic periodogram of one block, indexed by `i + N/2` for `i` in `[-N/2, N/2)`.
#[derive(Clone, Debug)]
pub struct CyclicPeriodogram<T> {
    pub p: Vec<Mat2<T>>,
    /// `||E1|| ||E2|| / N` per bin.
    pub magnitude: Vec<f64>,
    /// Centre frequency `f_i` of each bin pair, Hz.
    pub freqs: Vec<f64>,
    pub alpha: f64,
    pub sample_rate: f64,
}

impl<T: Real> CyclicPeriodogram<T> {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Reusable spectral front end for blocks of a fixed length.
struct BlockTransform<T: Real> {
    plan: FftPair<T>,
    n: usize,
    b: usize,
    h: usize,
    window: Option<Vec<f64>>,
    scale: f64,
    sample_rate: f64,
    xs: Vec<Complex<T>>,
    ys: Vec<Complex<T>>,
}

impl<T: Real> BlockTransform<T> {
    fn new(n: usize, alpha: f64, sample_rate: f64, window: Window) -> Result<Self> {
        let b = cyclic_bin(n, alpha, sample_rate)?;
        let window = window.coefficients(n);
        let scale = match &window {
            Some(w) => w.iter().map(|v| v * v).sum(),
            None => n as f64,
        };
        Ok(Self {
            plan: FftPair::new(n),
            n,
            b,
            h: b / 2,
            window,
            scale,
            sample_rate,
            xs: vec![Complex::default(); n],
            ys: vec![Complex::default(); n],
        })
    }

    fn load(&mut self, x: &[Complex<T>], y: &[Complex<T>]) {
        match &self.window {
            None => {
                self.xs.copy_from_slice(x);
                self.ys.copy_from_slice(y);
            }
            Some(w) => {
                for i in 0..self.n {
                    let c = T::lit(w[i]);
                    self.xs[i] = x[i] * c;
                    self.ys[i] = y[i] * c;
                }
            }
        }
        self.plan.forward(&mut self.xs);
        self.plan.forward(&mut self.ys);
    }

    /// Signed index `i` to the spectral bin pair and centre frequency.
    #[inline]
    fn pair(&self, i: i64) -> (usize, usize, f64) {
        let n = self.n as i64;
        let k1 = (i - self.h as i64 + self.b as i64).rem_euclid(n) as usize;
        let k2 = (i - self.h as i64).rem_euclid(n) as usize;
        let f = (i as f64 + (self.b as f64 - 2.0 * self.h as f64) / 2.0) * self.sample_rate
            / self.n as f64;
        (k1, k2, f)
    }

    #[inline]
    fn vectors(&self, k1: usize, k2: usize) -> ([Complex<T>; 2], [Complex<T>; 2]) {
        ([self.xs[k1], self.ys[k1]], [self.xs[k2], self.ys[k2]])
    }
}

/// `P'(f) = E1(f) E2(f)^H` for one block.
pub fn cyclic_periodogram<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
    window: Window,
) -> Result<CyclicPeriodogram<T>> {
    let n = check_block(x, y)?;
    let mut bt = BlockTransform::new(n, alpha, sample_rate, window)?;
    bt.load(x, y);
    let s = T::lit(1.0 / bt.scale);
    let half = (n / 2) as i64;
    let mut p = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let mut freqs = Vec::with_capacity(n);
    for i in -half..half {
        let (k1, k2, f) = bt.pair(i);
        let (e1, e2) = bt.vectors(k1, k2);
        p.push(Mat2::outer(e1, e2).scale_re(s));
        let n1 = (e1[0].norm_sqr() + e1[1].norm_sqr()).as_f64().sqrt();
        let n2 = (e2[0].norm_sqr() + e2[1].norm_sqr()).as_f64().sqrt();
        magnitude.push(n1 * n2 / bt.scale);
        freqs.push(f);
    }
    Ok(CyclicPeriodogram {
        p,
        magnitude,
        freqs,
        alpha,
        sample_rate,
    })
}

/// Running band average over blocks. Sums are kept in `f64` and accumulated
/// in block order, so results do not depend on the scalar type beyond the
/// per-block spectra.
#[derive(Clone, Debug)]
struct BandSum {
    sum: Mat2<f64>,
    mag: f64,
    bins: usize,
    blocks: usize,
}

impl BandSum {
    fn new() -> Self {
        Self {
            sum: Mat2::zero(),
            mag: 0.0,
            bins: 0,
            blocks: 0,
        }
    }

    fn finish<T: Real>(
        &self,
        alpha: f64,
        tau: f64,
        norm: Normalization,
    ) -> Result<CyclicMatrixEstimate<T>> {
        if self.bins == 0 {
            return Err(Error::EmptyBand);
        }
        let avg = self.sum.scale_re(1.0 / self.bins as f64);
        let a = self.mag / self.bins as f64 / 2.0;
        let (m, strength) = match norm {
            Normalization::None => (avg, 1.0),
            Normalization::Band if a > 0.0 => (avg.scale_re(1.0 / a), a),
            Normalization::Band => (avg, 0.0),
        };
        let est = CyclicMatrixEstimate {
            m: m.cast::<T>(),
            alpha,
            tau,
            n_blocks: self.blocks,
            strength,
        };
        est.validate()?;
        Ok(est)
    }
}

/// Averages `P'(f) e^{j 2 pi f tau}` over `band` and over all periodograms.
///
/// With `tau = tau_CD` the dispersion-induced linear phase across the band is
/// removed before integration.
pub fn average_cyclic_matrix<T: Real>(
    periodograms: &[CyclicPeriodogram<T>],
    band: Band,
    cd_phase_tau: f64,
    normalization: Normalization,
) -> Result<CyclicMatrixEstimate<T>> {
    let first = periodograms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no periodograms to average".into()))?;
    let alpha = first.alpha;
    let mut acc = BandSum::new();
    for pg in periodograms {
        if pg.alpha != alpha || pg.len() != first.len() {
            return invalid("periodograms differ in alpha or length");
        }
        for (i, &f) in pg.freqs.iter().enumerate() {
            if !band.contains(f, alpha) {
                continue;
            }
            let rot: Complex<f64> = cis(2.0 * PI * f * cd_phase_tau);
            acc.sum = acc.sum + pg.p[i].cast::<f64>().scale(rot);
            acc.mag += pg.magnitude[i];
            acc.bins += 1;
        }
        acc.blocks += 1;
    }
    acc.finish(alpha, cd_phase_tau, normalization)
}

/// Streaming estimator of the cyclic matrix over consecutive fixed-length
/// blocks. Holds its FFT plan, so one instance serves a whole loop.
pub struct CyclicEstimator<T: Real> {
    bt: BlockTransform<T>,
    cfg: CyclicConfig,
    alpha: f64,
    band_bins: Vec<(usize, usize, f64)>,
    rot_tau: f64,
    rot: Vec<Complex<f64>>,
}

impl<T: Real> CyclicEstimator<T> {
    pub fn new(block_len: usize, alpha: f64, sample_rate: f64, cfg: CyclicConfig) -> Result<Self> {
        if block_len < 4 || !block_len.is_power_of_two() {
            return invalid(format!(
                "block length must be a power of two >= 4, got {block_len}"
            ));
        }
        let bt = BlockTransform::new(block_len, alpha, sample_rate, cfg.window)?;
        let half = (block_len / 2) as i64;
        let band_bins: Vec<_> = (-half..half)
            .map(|i| bt.pair(i))
            .filter(|&(_, _, f)| cfg.band.contains(f, alpha))
            .collect();
        if band_bins.is_empty() {
            return Err(Error::EmptyBand);
        }
        let rot = vec![Complex::new(1.0, 0.0); band_bins.len()];
        Ok(Self {
            bt,
            cfg,
            alpha,
            band_bins,
            rot_tau: 0.0,
            rot,
        })
    }

    pub fn block_len(&self) -> usize {
        self.bt.n
    }

    fn set_tau(&mut self, tau: f64) {
        if tau != self.rot_tau {
            self.rot = self
                .band_bins
                .iter()
                .map(|&(_, _, f)| cis(2.0 * PI * f * tau))
                .collect();
            self.rot_tau = tau;
        }
    }

    fn accumulate(&mut self, acc: &mut BandSum, x: &[Complex<T>], y: &[Complex<T>]) {
        self.bt.load(x, y);
        let s = 1.0 / self.bt.scale;
        for (j, &(k1, k2, _)) in self.band_bins.iter().enumerate() {
            let (e1, e2) = self.bt.vectors(k1, k2);
            let e1 = e1.map(|z| Complex::new(z.re.as_f64(), z.im.as_f64()));
            let e2 = e2.map(|z| Complex::new(z.re.as_f64(), z.im.as_f64()));
            acc.sum = acc.sum + Mat2::outer(e1, e2).scale(self.rot[j] * s);
            let n1 = (e1[0].norm_sqr() + e1[1].norm_sqr()).sqrt();
            let n2 = (e2[0].norm_sqr() + e2[1].norm_sqr()).sqrt();
            acc.mag += n1 * n2 * s;
            acc.bins += 1;
        }
        acc.blocks += 1;
    }

    /// Estimate from a single block of exactly `block_len` samples.
    pub fn block(
        &mut self,
        x: &[Complex<T>],
        y: &[Complex<T>],
        tau: f64,
    ) -> Result<CyclicMatrixEstimate<T>> {
        if x.len() != self.bt.n || y.len() != self.bt.n {
            return invalid(format!("block must have {} samples", self.bt.n));
        }
        self.set_tau(tau);
        let mut acc = BandSum::new();
        self.accumulate(&mut acc, x, y);
        acc.finish(self.alpha, tau, self.cfg.normalization)
    }

    /// Average over consecutive non-overlapping blocks of `x`, `y`; a partial
    /// trailing block is ignored.
    pub fn average(
        &mut self,
        x: &[Complex<T>],
        y: &[Complex<T>],
        tau: f64,
    ) -> Result<CyclicMatrixEstimate<T>> {
        let n = self.bt.n;
        if x.len() != y.len() || x.len() < n {
            return invalid(format!(
                "need at least one block of {n} samples in each polarization"
            ));
        }
        self.set_tau(tau);
        let mut acc = BandSum::new();
        for k in 0..x.len() / n {
            self.accumulate(&mut acc, &x[k * n..(k + 1) * n], &y[k * n..(k + 1) * n]);
        }
        acc.finish(self.alpha, tau, self.cfg.normalization)
    }
}

/// Averages over the steady part of `w` in blocks of `block_len` samples.
pub fn estimate_cyclic_matrix<T: Real>(
    w: &DualPolWaveform<T>,
    block_len: usize,
    cfg: CyclicConfig,
    tau: f64,
) -> Result<CyclicMatrixEstimate<T>> {
    let r = w.steady_range();
    let mut est = CyclicEstimator::new(block_len, w.baud_rate, w.sample_rate, cfg)?;
    est.average(&w.x[r.clone()], &w.y[r], tau)
}

/// Matrix-valued cyclic autocorrelation on the lag grid `[-N/2, N/2)`.
#[derive(Clone, Debug)]
pub struct CafMatrix<T> {
    /// Delays `m Ts` in seconds, ascending.
    pub delays: Vec<f64>,
    /// `[[R_xx, R_xy], [R_yx, R_yy]]` per delay.
    pub entries: Vec<Mat2<T>>,
    pub alpha: f64,
    pub sample_rate: f64,
}

impl<T: Real> CafMatrix<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grid_step(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Index of lag `m` (in samples).
    pub fn index_of_lag(&self, m: i64) -> Option<usize> {
        let half = (self.len() / 2) as i64;
        let idx = m + half;
        (0..self.len() as i64)
            .contains(&idx)
            .then_some(idx as usize)
    }

    /// Column of `R_xx`.
    pub fn rxx(&self) -> Vec<Complex<T>> {
        self.entries.iter().map(|m| m.get(0, 0)).collect()
    }
}

/// Cyclic autocorrelation matrix from block-averaged periodograms.
pub fn caf_from_periodograms<T: Real>(
    periodograms: &[CyclicPeriodogram<T>],
) -> Result<CafMatrix<T>> {
    caf_from_periodograms_band(periodograms, Band::Full)
}

/// Like [`caf_from_periodograms`], with bins outside `band` set to zero.
///
/// At 2 samples/symbol `alpha = fs/2` and `-alpha` is the same frequency, so
/// the full-band CAF also holds the conjugate cycle, which mirrors the CD peak
/// to `-tau_CD`. Any band inside `|f| < alpha/2` keeps only the `+alpha` pairs.
pub fn caf_from_periodograms_band<T: Real>(
    periodograms: &[CyclicPeriodogram<T>],
    band: Band,
) -> Result<CafMatrix<T>> {
    let first = periodograms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no periodograms".into()))?;
    let n = first.len();
    let fs = first.sample_rate;
    let alpha = first.alpha;
    let b = cyclic_bin(n, alpha, fs)?;
    let h = b / 2;
    let mut avg = vec![Mat2::<T>::zero(); n];
    for pg in periodograms {
        if pg.len() != n || pg.alpha != alpha {
            return invalid("periodograms differ in alpha or length");
        }
        for (a, p) in avg.iter_mut().zip(&pg.p) {
            *a = *a + *p;
        }
    }
    let s = T::lit(1.0 / (periodograms.len() as f64 * n as f64));
    // entry-wise inverse transform over i, stored with i mod N ordering
    let plan = FftPair::<T>::new(n);
    let mut cols: [[Vec<Complex<T>>; 2]; 2] = Default::default();
    for r in 0..2 {
        for c in 0..2 {
            let mut buf = vec![Complex::default(); n];
            for (j, m) in avg.iter().enumerate() {
                if !band.contains(first.freqs[j], alpha) {
                    continue;
                }
                let i = j as i64 - (n / 2) as i64;
                buf[i.rem_euclid(n as i64) as usize] = m.get(r, c);
            }
            plan.inverse(&mut buf);
            cols[r][c] = buf;
        }
    }
    let half = (n / 2) as i64;
    let ts = 1.0 / fs;
    let mut delays = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    // inverse() already divides by N, so multiply back once and apply 1/(blocks N)
    let undo = T::lit(n as f64);
    for m in -half..half {
        let k = m.rem_euclid(n as i64) as usize;
        let ph: Complex<T> = cis(PI * (b as f64 - 2.0 * h as f64) * m as f64 / n as f64);
        let e = Mat2::new(cols[0][0][k], cols[0][1][k], cols[1][0][k], cols[1][1][k]);
        entries.push(e.scale(ph * undo * s));
        delays.push(m as f64 * ts);
    }
    Ok(CafMatrix {
        delays,
        entries,
        alpha,
        sample_rate: fs,
    })
}

/// CAF matrix averaged over the consecutive `block_len` blocks of the steady
/// part of `w`, at cyclic frequency `alpha`.
pub fn caf_matrix<T: Real>(
    w: &DualPolWaveform<T>,
    block_len: usize,
    alpha: f64,
) -> Result<CafMatrix<T>> {
    caf_matrix_band(w, block_len, alpha, Band::Full)
}

/// Band-limited [`caf_matrix`]; the form to use for CD estimation.
pub fn caf_matrix_band<T: Real>(
    w: &DualPolWaveform<T>,
    block_len: usize,
    alpha: f64,
    band: Band,
) -> Result<CafMatrix<T>> {
    let r = w.steady_range();
    let (x, y) = (&w.x[r.clone()], &w.y[r]);
    if x.len() < block_len {
        return invalid(format!(
            "record of {} samples is shorter than one block",
            x.len()
        ));
    }
    let pgs = (0..x.len() / block_len)
        .map(|k| {
            let s = k * block_len..(k + 1) * block_len;
            cyclic_periodogram(
                &x[s.clone()],
                &y[s],
                alpha,
                w.sample_rate,
                Window::Rectangular,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    caf_from_periodograms_band(&pgs, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::waveform::{generate_symbols, synthesize_periodic, Constellation, PulseShape};

    type C = Complex<f64>;
    const BAUD: f64 = 32e9;
    const FS: f64 = 64e9;

    fn wave(n_sym: usize, seed: u64, tau: f64) -> DualPolWaveform<f64> {
        let c = Constellation::qam16();
        let (a, b) = generate_symbols(seed, n_sym, &c).unwrap();
        synthesize_periodic(&a, &b, &PulseShape::rrc(0.1, 32).unwrap(), 2, tau, BAUD).unwrap()
    }

    #[test]
    fn off_grid_alpha_rejected() {
        let x = vec![C::default(); 1000];
        assert!(cyclic_periodogram(&x, &x, BAUD, FS, Window::Rectangular).is_err());
        let x = vec![C::default(); 1024];
        assert!(matches!(
            cyclic_periodogram(&x, &x, 31.9e9, FS, Window::Rectangular),
            Err(Error::OffGrid { .. })
        ));
    }

    #[test]
    fn zero_block_gives_zero() {
        let x = vec![C::default(); 256];
        let pg = cyclic_periodogram(&x, &x, BAUD, FS, Window::Rectangular).unwrap();
        assert!(pg.p.iter().all(|m| m.frobenius() == 0.0));
    }

    #[test]
    fn two_tone_single_entry() {
        let n = 256;
        let (k1, k2) = (40usize, 20usize);
        let x: Vec<C> = (0..n)
            .map(|t| {
                cis::<f64>(2.0 * PI * (k1 * t) as f64 / n as f64)
                    + cis::<f64>(2.0 * PI * (k2 * t) as f64 / n as f64)
            })
            .collect();
        let y = vec![C::default(); n];
        let alpha = (k1 - k2) as f64 * FS / n as f64;
        let pg = cyclic_periodogram(&x, &y, alpha, FS, Window::Rectangular).unwrap();
        let mid = 0.5 * (k1 + k2) as f64 * FS / n as f64;
        let mut hits = 0;
        for (m, f) in pg.p.iter().zip(&pg.freqs) {
            let v = m.get(0, 0).norm();
            if v > 1e-9 {
                hits += 1;
                assert!((f - mid).abs() < 1e-3, "{f} vs {mid}");
                assert!((v - n as f64).abs() < 1e-9);
                assert!(m.get(0, 1).norm() + m.get(1, 0).norm() + m.get(1, 1).norm() < 1e-9);
            }
        }
        assert_eq!(hits, 1);
    }

    #[test]
    fn no_channel_average_is_identity() {
        // a single 512-symbol block leaves ~50 bins in the excess band, so
        // entries fluctuate by ~1/sqrt(50); 32 blocks bring that below 0.05
        let w = wave(512, 1, 0.0);
        let m = estimate_cyclic_matrix(&w, 1024, CyclicConfig::default(), 0.0)
            .unwrap()
            .m;
        assert!((m.trace() - C::new(2.0, 0.0)).norm() < 0.3, "{m:?}");
        assert!(
            m.get(0, 1).norm() < 0.4 && m.get(1, 0).norm() < 0.4,
            "{m:?}"
        );

        let w = wave(512 * 32, 1, 0.0);
        let m = estimate_cyclic_matrix(&w, 1024, CyclicConfig::default(), 0.0)
            .unwrap()
            .m;
        assert!((m.get(0, 0) - C::new(1.0, 0.0)).norm() < 0.05, "{m:?}");
        assert!((m.get(1, 1) - C::new(1.0, 0.0)).norm() < 0.05, "{m:?}");
        assert!(
            m.get(0, 1).norm() < 0.05 && m.get(1, 0).norm() < 0.05,
            "{m:?}"
        );
        assert!(m.trace().im.abs() < 0.02);
    }

    #[test]
    fn unnormalized_full_band_equals_caf_at_zero() {
        let w = wave(256, 3, 0.2 / BAUD);
        let pg = cyclic_periodogram(&w.x, &w.y, BAUD, FS, Window::Rectangular).unwrap();
        let est = average_cyclic_matrix(
            std::slice::from_ref(&pg),
            Band::Full,
            0.0,
            Normalization::None,
        )
        .unwrap();
        let caf = caf_from_periodograms(&[pg]).unwrap();
        let r0 = caf.entries[caf.index_of_lag(0).unwrap()];
        assert!(est.m.max_abs_diff(&r0) < 1e-12);
    }

    #[test]
    fn caf_matches_direct_sum() {
        let w = wave(256, 5, 0.3 / BAUD);
        let caf = caf_matrix(&w, 512, BAUD).unwrap();
        let direct = oracle::caf_direct(&w.x, &w.y, BAUD, FS);
        let scale = direct.iter().map(|m| m.frobenius()).fold(0.0, f64::max);
        for (a, b) in caf.entries.iter().zip(&direct) {
            assert!(a.max_abs_diff(b) / scale < 1e-9);
        }
    }

    #[test]
    fn band_limited_caf_drops_conjugate_cycle() {
        let w = wave(1024, 11, 0.0);
        let wd = crate::channel::apply_cd(&w, 8.5, crate::channel::DEFAULT_WAVELENGTH).unwrap();
        let tau = crate::channel::cd_delay(8.5, crate::channel::DEFAULT_WAVELENGTH, BAUD);
        let m = (tau * FS).round() as i64;
        let energy =
            |c: &CafMatrix<f64>, lag: i64| c.entries[c.index_of_lag(lag).unwrap()].column_energy(0);
        let full = caf_matrix(&wd, wd.len(), BAUD).unwrap();
        let ratio = energy(&full, -m) / energy(&full, m);
        assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
        let band = caf_matrix_band(&wd, wd.len(), BAUD, Band::for_rolloff(0.1)).unwrap();
        let r = energy(&band, -m) / energy(&band, m);
        assert!(r < 0.1, "{r}");
        let peak = (0..band.entries.len())
            .max_by(|&a, &b| {
                band.entries[a]
                    .column_energy(0)
                    .total_cmp(&band.entries[b].column_energy(0))
            })
            .unwrap();
        assert!((band.delays[peak] * FS - m as f64).abs() <= 1.0);
    }

    #[test]
    fn spectral_coherence_is_unity_in_excess_band() {
        // whole periodic record as one block: X(f + a/2) and X(f - a/2) share
        // the same symbol spectrum, so coherence is exact per bin
        let w = wave(2048, 7, 0.0);
        let pg = cyclic_periodogram(&w.x, &w.y, BAUD, FS, Window::Rectangular).unwrap();
        let n = w.len();
        let spec = crate::fft::forward(&w.x);
        let b = n / 2;
        for (i, f) in pg.freqs.iter().enumerate() {
            if f.abs() > 0.04 * BAUD {
                continue;
            }
            let k = i as i64 - (n / 2) as i64;
            let k1 = (k - (b / 2) as i64 + b as i64).rem_euclid(n as i64) as usize;
            let k2 = (k - (b / 2) as i64).rem_euclid(n as i64) as usize;
            let s1 = spec[k1].norm_sqr() / n as f64;
            let s2 = spec[k2].norm_sqr() / n as f64;
            let coh = pg.p[i].get(0, 0).norm() / (s1 * s2).sqrt();
            assert!((coh - 1.0).abs() < 1e-9, "{coh}");
        }
    }

    #[test]
    fn cd_collapses_and_derotation_restores() {
        let w = wave(4096, 9, 0.0);
        let dl = 8.5;
        let wd = crate::channel::apply_cd(&w, dl, crate::channel::DEFAULT_WAVELENGTH).unwrap();
        let tau = crate::channel::cd_delay(dl, crate::channel::DEFAULT_WAVELENGTH, BAUD);
        let cfg = CyclicConfig::default();
        let plain = estimate_cyclic_matrix(&wd, 1024, cfg, 0.0).unwrap();
        let fixed = estimate_cyclic_matrix(&wd, 1024, cfg, tau).unwrap();
        assert!(plain.m.frobenius() < 0.3, "{}", plain.m.frobenius());
        assert!(fixed.m.frobenius() > 1.0, "{}", fixed.m.frobenius());
    }

    #[test]
    fn empty_band_rejected() {
        assert!(matches!(
            // odd bin offset: no pair is centred on f = 0
            CyclicEstimator::<f64>::new(
                1024,
                511.0 * FS / 1024.0,
                FS,
                CyclicConfig {
                    band: Band::Fraction(1e-6),
                    ..Default::default()
                }
            ),
            Err(Error::EmptyBand)
        ));
    }

    #[test]
    fn streaming_matches_periodogram_average() {
        let w = wave(2048, 11, 0.1 / BAUD);
        let cfg = CyclicConfig::default();
        let mut est = CyclicEstimator::new(1024, BAUD, FS, cfg).unwrap();
        let s = est.average(&w.x, &w.y, 1e-10).unwrap();
        let pgs: Vec<_> = (0..4)
            .map(|k| {
                let r = k * 1024..(k + 1) * 1024;
                cyclic_periodogram(&w.x[r.clone()], &w.y[r], BAUD, FS, Window::Rectangular).unwrap()
            })
            .collect();
        let a = average_cyclic_matrix(&pgs, cfg.band, 1e-10, cfg.normalization).unwrap();
        assert!(s.m.max_abs_diff(&a.m) < 1e-12);
        assert_eq!(s.n_blocks, 4);
    }
}
