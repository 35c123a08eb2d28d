//! Dual-polarization linearly modulated baseband waveforms.
//!
//! `x(t) = sum_n a_n g(t - tau_g - n T0)` and the same for `y` with an
//! independent symbol stream. Two synthesizers are provided:
//!
//! * [`modulate`] convolves with the pulse truncated to `span` symbols and
//!   evaluates the pulse at the exact shifted instants. The record has
//!   `span` symbols of start-up/tail transient at each end.
//! * [`synthesize_periodic`] builds the circularly periodic waveform directly in
//!   the frequency domain from the closed-form pulse spectrum. It has no
//!   truncation error and no transient, which makes FFT-domain channel
//!   operators exact. Long simulations use it.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::fft::{bin_freq, FftPair};
use crate::scalar::{cis, Real};

/// Symbol alphabet normalized to unit mean power.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation<T> {
    points: Vec<Complex<T>>,
    label: String,
}

impl<T: Real> Constellation<T> {
    /// Normalizes `points` to unit average power. The index of each point is
    /// its bit label.
    pub fn from_points(label: impl Into<String>, points: Vec<Complex<T>>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("constellation needs at least two points");
        }
        let p: f64 =
            points.iter().map(|z| z.norm_sqr().as_f64()).sum::<f64>() / points.len() as f64;
        if !(p > 0.0) || !p.is_finite() {
            return invalid("constellation has zero or non-finite power");
        }
        let s = T::lit(1.0 / p.sqrt());
        Ok(Self {
            points: points.into_iter().map(|z| z * s).collect(),
            label: label.into(),
        })
    }

    pub fn bpsk() -> Self {
        Self::from_points(
            "BPSK",
            vec![
                Complex::new(T::one(), T::zero()),
                Complex::new(-T::one(), T::zero()),
            ],
        )
        .expect("static constellation")
    }

    /// Gray-labelled QPSK: bit 1 selects the I sign, bit 0 the Q sign.
    pub fn qpsk() -> Self {
        let pts = (0..4)
            .map(|i| {
                let re = if i & 2 == 0 { 1.0 } else { -1.0 };
                let im = if i & 1 == 0 { 1.0 } else { -1.0 };
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        Self::from_points("QPSK", pts).expect("static constellation")
    }

    /// Gray-labelled square 16-QAM: bits 3..2 pick the I level, bits 1..0 the
    /// Q level, each through the Gray map 00,01,11,10 -> -3,-1,1,3.
    pub fn qam16() -> Self {
        const LEVEL: [f64; 4] = [-3.0, -1.0, 3.0, 1.0]; // indexed by 2-bit label
        let pts = (0..16)
            .map(|i| Complex::new(T::lit(LEVEL[(i >> 2) & 3]), T::lit(LEVEL[i & 3])))
            .collect();
        Self::from_points("16QAM", pts).expect("static constellation")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" => Ok(Self::qpsk()),
            "16qam" | "qam16" => Ok(Self::qam16()),
            other => invalid(format!("unknown modulation '{other}'")),
        }
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bits carried per symbol (floor of log2 of the alphabet size).
    pub fn bits_per_symbol(&self) -> u32 {
        usize::BITS - 1 - self.points.len().leading_zeros()
    }

    /// Index of the nearest point (hard decision).
    pub fn nearest(&self, z: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseKind {
    RootRaisedCosine,
    RaisedCosine,
}

/// Real, even pulse `g(t)` with excess bandwidth `rolloff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseShape {
    pub rolloff: f64,
    /// Truncation length in symbols (even) used by time-domain filtering.
    pub span: usize,
    pub kind: PulseKind,
}

impl PulseShape {
    pub fn rrc(rolloff: f64, span: usize) -> Result<Self> {
        let p = Self {
            rolloff,
            span,
            kind: PulseKind::RootRaisedCosine,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn rc(rolloff: f64, span: usize) -> Result<Self> {
        let p = Self {
            rolloff,
            span,
            kind: PulseKind::RaisedCosine,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        // zero rolloff leaves no spectral correlation at the baud rate
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return invalid(format!("rolloff must lie in (0, 1], got {}", self.rolloff));
        }
        if self.span == 0 || self.span % 2 != 0 {
            return invalid(format!(
                "span must be a positive even number of symbols, got {}",
                self.span
            ));
        }
        Ok(())
    }

    /// `g(t)` with `t` in symbol periods. The RRC is scaled to unit energy per
    /// symbol period (`g(0) = 1 - b + 4b/pi`), the RC to `g(0) = 1`.
    pub fn impulse(&self, t: f64) -> f64 {
        let b = self.rolloff;
        match self.kind {
            PulseKind::RootRaisedCosine => {
                if t.abs() < 1e-10 {
                    return 1.0 - b + 4.0 * b / PI;
                }
                let q = 4.0 * b * t;
                if (1.0 - q * q).abs() < 1e-10 {
                    let a = PI / (4.0 * b);
                    return b / 2f64.sqrt()
                        * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
                }
                ((PI * t * (1.0 - b)).sin() + q * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - q * q))
            }
            PulseKind::RaisedCosine => {
                let q = 2.0 * b * t;
                if (1.0 - q * q).abs() < 1e-10 {
                    return PI / 4.0 * sinc(1.0 / (2.0 * b));
                }
                sinc(t) * (PI * b * t).cos() / (1.0 - q * q)
            }
        }
    }

    /// Normalized spectrum `G(f)/T0` with `f` in units of the baud rate.
    pub fn spectrum(&self, f: f64) -> f64 {
        let b = self.rolloff;
        let u = f.abs();
        let lo = (1.0 - b) / 2.0;
        let hi = (1.0 + b) / 2.0;
        let rc = if u <= lo {
            1.0
        } else if u < hi {
            0.5 * (1.0 + (PI / b * (u - lo)).cos())
        } else {
            0.0
        };
        match self.kind {
            PulseKind::RootRaisedCosine => rc.sqrt(),
            PulseKind::RaisedCosine => rc,
        }
    }

    /// Two-sided occupied bandwidth as a multiple of the baud rate.
    pub fn bandwidth(&self) -> f64 {
        1.0 + self.rolloff
    }

    /// Taps at `sps` samples per symbol centred on sample `span*sps/2`.
    pub fn taps(&self, sps: usize) -> Vec<f64> {
        let len = self.span * sps + 1;
        let centre = (self.span * sps / 2) as f64;
        (0..len)
            .map(|n| self.impulse((n as f64 - centre) / sps as f64))
            .collect()
    }

    /// Clock-tone strength of `|x|^2` relative to its mean, for unit-power
    /// symbols: `int G(f + 1/2T) G(f - 1/2T) df / int G^2 df`.
    pub fn clock_tone_ratio(&self) -> f64 {
        let b = self.rolloff;
        let n = 4096;
        let mut num = 0.0;
        let mut den = 0.0;
        let du = (1.0 + b) / n as f64;
        for i in 0..n {
            let u = -0.5 * (1.0 + b) + (i as f64 + 0.5) * du;
            num += self.spectrum(u + 0.5) * self.spectrum(u - 0.5) * du;
            den += self.spectrum(u).powi(2) * du;
        }
        num / den
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Sampled x/y polarization streams.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPolWaveform<T> {
    pub x: Vec<Complex<T>>,
    pub y: Vec<Complex<T>>,
    pub sample_rate: f64,
    pub baud_rate: f64,
    /// Samples at each end that belong to start-up or tail transients.
    pub transient: usize,
}

impl<T: Real> DualPolWaveform<T> {
    pub fn new(
        x: Vec<Complex<T>>,
        y: Vec<Complex<T>>,
        sample_rate: f64,
        baud_rate: f64,
    ) -> Result<Self> {
        let w = Self {
            x,
            y,
            sample_rate,
            baud_rate,
            transient: 0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return invalid(format!(
                "polarization lengths differ: {} vs {}",
                self.x.len(),
                self.y.len()
            ));
        }
        if !(self.baud_rate > 0.0 && self.sample_rate > 0.0) {
            return invalid("sample and baud rates must be positive");
        }
        let ratio = self.sample_rate / self.baud_rate;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 2.0 {
            return invalid(format!(
                "samples per symbol must be an integer >= 2, got {ratio}"
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sps(&self) -> usize {
        (self.sample_rate / self.baud_rate).round() as usize
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.baud_rate
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Mean of `|x|^2 + |y|^2` over the whole record.
    pub fn power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).as_f64())
            .sum();
        s / self.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.power() * self.len() as f64
    }

    /// Index range excluding the flagged transients.
    pub fn steady_range(&self) -> std::ops::Range<usize> {
        let t = self.transient.min(self.len() / 2);
        t..self.len() - t
    }

    /// Same metadata with new sample vectors.
    pub fn with_samples(&self, x: Vec<Complex<T>>, y: Vec<Complex<T>>) -> Self {
        Self {
            x,
            y,
            sample_rate: self.sample_rate,
            baud_rate: self.baud_rate,
            transient: self.transient,
        }
    }

    /// Copies samples `range` (wrapping around the end of the record).
    pub fn slice_circular(&self, start: usize, len: usize) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.len();
        let idx = |i: usize| (start + i) % n;
        (
            (0..len).map(|i| self.x[idx(i)]).collect(),
            (0..len).map(|i| self.y[idx(i)]).collect(),
        )
    }
}

/// Draws symbol index streams for the two polarizations from independent
/// ChaCha streams of `seed`.
pub fn generate_symbol_indices(
    seed: u64,
    count: usize,
    alphabet: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if alphabet == 0 {
        return invalid("empty constellation");
    }
    if count == 0 {
        return invalid("symbol count must be at least 1");
    }
    let draw = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..count)
            .map(|_| rng.random_range(0..alphabet))
            .collect::<Vec<_>>()
    };
    Ok((draw(0), draw(1)))
}

/// Independent symbol sequences `(a_n, b_n)`, deterministic in `seed`.
pub fn generate_symbols<T: Real>(
    seed: u64,
    count: usize,
    constellation: &Constellation<T>,
) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let (ia, ib) = generate_symbol_indices(seed, count, constellation.len())?;
    let pts = constellation.points();
    Ok((
        ia.iter().map(|&i| pts[i]).collect(),
        ib.iter().map(|&i| pts[i]).collect(),
    ))
}

fn check_symbols<T>(a: &[Complex<T>], b: &[Complex<T>], sps: usize) -> Result<()> {
    if sps < 2 {
        return invalid(format!(
            "sps must be >= 2 for baud-rate cyclostationarity, got {sps}"
        ));
    }
    if a.len() != b.len() || a.is_empty() {
        return invalid("symbol streams must be non-empty and of equal length");
    }
    Ok(())
}

/// Time-domain modulation with the pulse truncated to `pulse.span` symbols.
///
/// Output has `(count + span) * sps` samples; symbol `k` peaks at sample
/// `(k + span/2) * sps` plus `tau_g`. The first and last `span * sps` samples
/// are flagged as transient.
pub fn modulate<T: Real>(
    a: &[Complex<T>],
    b: &[Complex<T>],
    pulse: &PulseShape,
    sps: usize,
    tau_g: f64,
    baud_rate: f64,
) -> Result<DualPolWaveform<T>> {
    check_symbols(a, b, sps)?;
    pulse.validate()?;
    let t0 = 1.0 / baud_rate;
    if !(tau_g.abs() < pulse.span as f64 * t0) {
        return invalid(format!("|tau_g| must be below span*T0, got {tau_g}"));
    }
    let spsf = sps as f64;
    let shift = tau_g * baud_rate * spsf; // in samples
    let half = (pulse.span * sps / 2) as f64;
    // Support of g((m - shift - half)/sps): |m - shift - half| <= half
    let m_lo = shift.ceil() as i64;
    let m_hi = (shift + 2.0 * half).floor() as i64;
    let taps: Vec<T> = (m_lo..=m_hi)
        .map(|m| T::lit(pulse.impulse((m as f64 - shift - half) / spsf)))
        .collect();

    let n_out = (a.len() + pulse.span) * sps;
    let mut x = vec![Complex::new(T::zero(), T::zero()); n_out];
    let mut y = x.clone();
    for (k, (&ak, &bk)) in a.iter().zip(b).enumerate() {
        let base = (k * sps) as i64 + m_lo;
        for (i, &h) in taps.iter().enumerate() {
            let n = base + i as i64;
            if n < 0 || n >= n_out as i64 {
                continue;
            }
            let n = n as usize;
            x[n] += ak * h;
            y[n] += bk * h;
        }
    }
    let mut w = DualPolWaveform::new(x, y, baud_rate * spsf, baud_rate)?;
    w.transient = pulse.span * sps;
    Ok(w)
}

/// Circularly periodic waveform built from the exact pulse spectrum.
///
/// The record holds `a.len() * sps` samples; symbol `k` peaks at sample
/// `k * sps` plus `tau_g` (modulo the record length). `pulse.span` is unused
/// because no truncation takes place.
pub fn synthesize_periodic<T: Real>(
    a: &[Complex<T>],
    b: &[Complex<T>],
    pulse: &PulseShape,
    sps: usize,
    tau_g: f64,
    baud_rate: f64,
) -> Result<DualPolWaveform<T>> {
    check_symbols(a, b, sps)?;
    pulse.validate()?;
    let n = a.len() * sps;
    let fs = baud_rate * sps as f64;
    let mut xu = vec![Complex::new(T::zero(), T::zero()); n];
    let mut yu = xu.clone();
    for k in 0..a.len() {
        xu[k * sps] = a[k];
        yu[k * sps] = b[k];
    }
    let plan = FftPair::new(n);
    plan.forward(&mut xu);
    plan.forward(&mut yu);
    for m in 0..n {
        let f = bin_freq(m, n, fs);
        let g = sps as f64 * pulse.spectrum(f / baud_rate);
        let h: Complex<T> = cis::<T>(-2.0 * PI * f * tau_g) * T::lit(g);
        xu[m] = xu[m] * h;
        yu[m] = yu[m] * h;
    }
    plan.inverse(&mut xu);
    plan.inverse(&mut yu);
    DualPolWaveform::new(xu, yu, fs, baud_rate)
}

/// Matched filtering with the truncated pulse, compensating the filter delay
/// so sample alignment is preserved (circular convolution).
pub fn matched_filter<T: Real>(w: &DualPolWaveform<T>, pulse: &PulseShape) -> DualPolWaveform<T> {
    let taps = pulse.taps(w.sps());
    let energy: f64 = taps.iter().map(|t| t * t).sum::<f64>() / w.sps() as f64;
    let taps: Vec<T> = taps.iter().map(|t| T::lit(t / energy)).collect();
    let half = (taps.len() / 2) as isize;
    let n = w.len() as isize;
    let filt = |s: &[Complex<T>]| -> Vec<Complex<T>> {
        (0..n)
            .map(|i| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (k, &h) in taps.iter().enumerate() {
                    let j = (i + k as isize - half).rem_euclid(n) as usize;
                    acc += s[j] * h;
                }
                acc / T::lit(w.sps() as f64)
            })
            .collect()
    };
    w.with_samples(filt(&w.x), filt(&w.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;
    const BAUD: f64 = 32e9;

    #[test]
    fn constellations_have_unit_power() {
        for c in [
            Constellation::<f64>::bpsk(),
            Constellation::qpsk(),
            Constellation::qam16(),
        ] {
            let p: f64 = c.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{}: {p}", c.label());
        }
        assert_eq!(Constellation::<f64>::qam16().bits_per_symbol(), 4);
        assert!(Constellation::<f64>::from_points("one", vec![C::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn qam16_is_gray_labelled() {
        let c = Constellation::<f64>::qam16();
        let pts = c.points();
        let min_d = 2.0 / 10f64.sqrt();
        for i in 0..16 {
            for j in 0..16 {
                let d = (pts[i] - pts[j]).norm();
                if (d - min_d).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "neighbours {i} {j}");
                }
            }
        }
    }

    #[test]
    fn nearest_is_identity_on_points() {
        let c = Constellation::<f64>::qam16();
        for (i, p) in c.points().iter().enumerate() {
            assert_eq!(c.nearest(*p + C::new(0.05, -0.05)), i);
        }
    }

    #[test]
    fn bpsk_symbols_are_reproducible() {
        let c = Constellation::<f64>::bpsk();
        let (a1, b1) = generate_symbols(1, 4, &c).unwrap();
        let (a2, b2) = generate_symbols(1, 4, &c).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert!(a1
            .iter()
            .all(|z| (z.re.abs() - 1.0).abs() < 1e-15 && z.im == 0.0));
    }

    #[test]
    fn empty_constellation_rejected() {
        assert!(generate_symbol_indices(1, 4, 0).is_err());
        assert!(generate_symbol_indices(1, 0, 4).is_err());
    }

    #[test]
    fn rrc_removable_singularities_are_continuous() {
        let p = PulseShape::rrc(0.25, 16).unwrap();
        let ts = 1.0 / (4.0 * 0.25);
        let at = p.impulse(ts);
        let near = p.impulse(ts + 1e-6);
        assert!((at - near).abs() < 1e-5, "{at} vs {near}");
        assert!((p.impulse(0.0) - p.impulse(1e-7)).abs() < 1e-6);
        let rc = PulseShape::rc(0.25, 16).unwrap();
        let ts = 1.0 / (2.0 * 0.25);
        assert!((rc.impulse(ts) - rc.impulse(ts + 1e-6)).abs() < 1e-5);
    }

    #[test]
    fn rrc_taps_even_symmetric_and_unit_energy() {
        let p = PulseShape::rrc(0.1, 64).unwrap();
        let taps = p.taps(2);
        let n = taps.len();
        for i in 0..n {
            assert!((taps[i] - taps[n - 1 - i]).abs() < 1e-14);
        }
        let e: f64 = taps.iter().map(|t| t * t).sum::<f64>() / 2.0;
        assert!((e - 1.0).abs() < 5e-3, "energy {e}");
    }

    #[test]
    fn rc_is_nyquist() {
        let p = PulseShape::rc(0.3, 16).unwrap();
        for k in 1..8 {
            assert!(p.impulse(k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rolloff_and_odd_span_rejected() {
        assert!(PulseShape::rrc(0.0, 16).is_err());
        assert!(PulseShape::rrc(0.1, 15).is_err());
    }

    #[test]
    fn modulate_impulse_gives_taps() {
        let p = PulseShape::rrc(0.1, 16).unwrap();
        let a = vec![C::new(1.0, 0.0)];
        let b = vec![C::new(0.0, 0.0)];
        let w = modulate(&a, &b, &p, 2, 0.0, BAUD).unwrap();
        let taps = p.taps(2);
        for (i, t) in taps.iter().enumerate() {
            assert!((w.x[i].re - t).abs() < 1e-15 && w.x[i].im == 0.0);
        }
        assert!(w.x[taps.len()..].iter().all(|z| z.norm() == 0.0));
        assert!(w.y.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn modulate_integer_delay_is_sample_shift() {
        let c = Constellation::<f64>::qpsk();
        let (a, b) = generate_symbols(4, 64, &c).unwrap();
        let p = PulseShape::rrc(0.1, 16).unwrap();
        let w0 = modulate(&a, &b, &p, 2, 0.0, BAUD).unwrap();
        let w1 = modulate(&a, &b, &p, 2, 1.0 / BAUD, BAUD).unwrap();
        for n in 0..w0.len() - 2 {
            assert!((w1.x[n + 2] - w0.x[n]).norm() < 1e-12);
            assert!((w1.y[n + 2] - w0.y[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn sps_below_two_rejected() {
        let a = vec![C::new(1.0, 0.0); 4];
        let p = PulseShape::rrc(0.1, 16).unwrap();
        assert!(modulate(&a, &a, &p, 1, 0.0, BAUD).is_err());
        assert!(synthesize_periodic(&a, &a, &p, 1, 0.0, BAUD).is_err());
        assert!(modulate(&a, &a, &p, 2, 20.0 / BAUD, BAUD).is_err());
    }

    #[test]
    fn periodic_matches_truncated_away_from_edges() {
        let c = Constellation::<f64>::qam16();
        let (a, b) = generate_symbols(9, 512, &c).unwrap();
        let p = PulseShape::rrc(0.5, 128).unwrap();
        let tau = 0.3 / BAUD;
        let lin = modulate(&a, &b, &p, 2, tau, BAUD).unwrap();
        let per = synthesize_periodic(&a, &b, &p, 2, tau, BAUD).unwrap();
        let lat = p.span; // span/2 symbols at 2 sps
        let mut err = 0.0f64;
        for n in 200..800 {
            err = err.max((lin.x[n + lat] - per.x[n]).norm());
        }
        // residual is the RRC tail beyond +-64 symbols
        assert!(err < 5e-4, "err {err}");
    }

    #[test]
    fn clock_tone_ratio_of_rrc() {
        // closed form rolloff/pi for the RRC
        for b in [0.1, 0.3, 0.8] {
            let p = PulseShape::rrc(b, 16).unwrap();
            assert!((p.clock_tone_ratio() - b / PI).abs() < 1e-5);
        }
    }
}
