//! Fiber channel: SOP rotation, first-order PMD, chromatic dispersion, ASE,
//! laser phase noise and sampling-clock jitter.
//!
//! Linear operators act on the whole record in the frequency domain, so they
//! are circular. Records from [`crate::waveform::synthesize_periodic`] are
//! periodic and therefore see the exact channel response.
//!
//! Per-bin operator, applied to the Jones vector `[X(f); Y(f)]`:
//!
//! ```text
//! H(f) = exp(-j K f^2) * exp(-j pi f dgd (p . sigma)) * V
//! ```
//!
//! with `K = pi lambda^2 DL / c`. With `V` applied first, the product of the
//! PMD operators at `f + alpha/2` and `f - alpha/2` collapses to exactly
//! [`pmd_matrix`]`(dgd, p, alpha)`. With this sign of `K` a positive `DL`
//! moves the cyclic autocorrelation peak to `+lambda^2 DL alpha / c`.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::fft::{bin_freq, FftPair};
use crate::jones::{JonesUnitary, Mat2, StokesVector};
use crate::scalar::{cis, Real};
use crate::seed::{derive_seed, rng};
use crate::waveform::DualPolWaveform;
use crate::SPEED_OF_LIGHT;

/// OSNR reference noise bandwidth, Hz (0.1 nm at 1550 nm).
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;

/// First-order PMD matrix `cos(pi a d) I - j sin(pi a d) (p . sigma)`.
pub fn pmd_matrix<T: Real>(dgd: f64, psp: &StokesVector<T>, alpha: f64) -> Result<JonesUnitary<T>> {
    psp.validate()?;
    if !(dgd.is_finite() && alpha.is_finite()) {
        return invalid("dgd and alpha must be finite");
    }
    Ok(JonesUnitary::from_axis_angle(
        psp,
        T::lit(2.0 * PI * alpha * dgd),
    ))
}

/// CAF peak displacement produced by accumulated dispersion `dl` (s/m).
pub fn cd_delay(dl: f64, wavelength: f64, alpha: f64) -> f64 {
    wavelength * wavelength * dl * alpha / SPEED_OF_LIGHT
}

/// Inverse of [`cd_delay`] with `alpha = 1/T0`: `DL = c T0 / lambda^2 * tau`.
pub fn dl_from_delay(tau_cd: f64, wavelength: f64, baud_rate: f64) -> f64 {
    SPEED_OF_LIGHT / (baud_rate * wavelength * wavelength) * tau_cd
}

/// Polarization rotation ahead of the PMD section.
#[derive(Clone, Debug, PartialEq)]
pub enum Sop {
    Fixed(JonesUnitary<f64>),
    /// Rotation about a random fixed Stokes axis at `rate` rad/s starting from
    /// a random Jones matrix, held constant over each `block` samples.
    Rotating {
        rate: f64,
        block: usize,
    },
}

impl Default for Sop {
    fn default() -> Self {
        Sop::Fixed(JonesUnitary::identity())
    }
}

/// Sinusoidal DGD variation `mid + half sin(2 pi f t + phase)` between `min`
/// and `max`, re-parameterized once per processing block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DgdSweep {
    pub min: f64,
    pub max: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl DgdSweep {
    pub fn at(&self, t: f64) -> f64 {
        let mid = 0.5 * (self.min + self.max);
        let half = 0.5 * (self.max - self.min);
        mid + half * (2.0 * PI * self.frequency * t + self.phase).sin()
    }
}

/// Sampling-instant offset `amplitude * T0 * sin(2 pi frequency t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    /// Peak deviation in unit intervals.
    pub amplitude: f64,
    pub frequency: f64,
    /// Initial phase in radians; drawn from the channel seed when `None`.
    pub phase: Option<f64>,
}

impl Jitter {
    /// Offset in unit intervals at time `t` for a resolved `phase`.
    pub fn offset_ui(&self, t: f64, phase: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t + phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    /// Accumulated dispersion `D L` in s/m (numerically equal to ns/nm).
    pub cd_total: f64,
    pub wavelength: f64,
    pub dgd: f64,
    pub psp: StokesVector<f64>,
    /// Overrides `dgd` with a time-varying value when set.
    pub dgd_sweep: Option<DgdSweep>,
    pub sop: Sop,
    /// OSNR in dB over [`OSNR_REF_BANDWIDTH`]; `+inf` disables ASE.
    pub osnr_db: f64,
    pub linewidth: f64,
    pub jitter: Option<Jitter>,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            cd_total: 0.0,
            wavelength: DEFAULT_WAVELENGTH,
            dgd: 0.0,
            psp: StokesVector {
                p1: 1.0,
                p2: 0.0,
                p3: 0.0,
            },
            dgd_sweep: None,
            sop: Sop::default(),
            osnr_db: f64::INFINITY,
            linewidth: 0.0,
            jitter: None,
            seed: 0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.cd_total.is_finite() {
            return invalid("cd_total must be finite");
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return invalid("wavelength must be positive");
        }
        if !(self.dgd >= 0.0 && self.dgd.is_finite()) {
            return invalid(format!("dgd must be >= 0, got {}", self.dgd));
        }
        self.psp.validate()?;
        if let Some(s) = &self.dgd_sweep {
            if !(s.min >= 0.0 && s.max >= s.min && s.max.is_finite() && s.frequency >= 0.0) {
                return invalid("dgd sweep needs 0 <= min <= max and frequency >= 0");
            }
        }
        if let Sop::Rotating { rate, block } = self.sop {
            if !rate.is_finite() || block == 0 {
                return invalid("rotating SOP needs a finite rate and block >= 1");
            }
        }
        if self.osnr_db.is_nan() || self.osnr_db == f64::NEG_INFINITY {
            return invalid("osnr_db must be finite or +inf");
        }
        if !(self.linewidth >= 0.0 && self.linewidth.is_finite()) {
            return invalid("linewidth must be >= 0");
        }
        if let Some(j) = &self.jitter {
            if !(j.amplitude >= 0.0 && j.amplitude.is_finite() && j.frequency >= 0.0) {
                return invalid("jitter amplitude and frequency must be >= 0");
            }
        }
        Ok(())
    }

    /// Resolved jitter phase (explicit or drawn from the seed).
    pub fn jitter_phase(&self) -> Option<f64> {
        self.jitter.map(|j| {
            j.phase
                .unwrap_or_else(|| rng(derive_seed(self.seed, 3)).random_range(0.0..2.0 * PI))
        })
    }

    fn ase_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    fn phase_noise_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }

    fn sop_seed(&self) -> u64 {
        derive_seed(self.seed, 4)
    }
}

/// Full channel in physical order: SOP, PMD + CD, ASE, phase noise, then the
/// sampling clock.
pub fn apply_channel<T: Real>(
    w: &DualPolWaveform<T>,
    spec: &ChannelSpec,
) -> Result<DualPolWaveform<T>> {
    spec.validate()?;
    w.validate()?;
    let mut out = apply_sop(w, &spec.sop, spec.sop_seed());
    out = match &spec.dgd_sweep {
        Some(sweep) => {
            apply_linear_varying(&out, spec.cd_total, spec.wavelength, sweep, &spec.psp)?
        }
        None => apply_linear(&out, spec.cd_total, spec.wavelength, spec.dgd, &spec.psp)?,
    };
    out = add_ase(&out, spec.osnr_db, spec.ase_seed())?;
    out = add_phase_noise(&out, spec.linewidth, spec.phase_noise_seed())?;
    if let (Some(j), Some(phase)) = (spec.jitter, spec.jitter_phase()) {
        out = apply_jitter_with_phase(&out, j.amplitude, j.frequency, phase)?;
    }
    Ok(out)
}

/// Per-sample Jones rotation. Rotating SOPs draw their axis and starting
/// matrix from `seed`.
pub fn apply_sop<T: Real>(w: &DualPolWaveform<T>, sop: &Sop, seed: u64) -> DualPolWaveform<T> {
    match sop {
        Sop::Fixed(v) => {
            let m = v.matrix().cast::<T>();
            let (x, y) =
                w.x.iter()
                    .zip(&w.y)
                    .map(|(&a, &b)| {
                        let r = m.apply([a, b]);
                        (r[0], r[1])
                    })
                    .unzip();
            w.with_samples(x, y)
        }
        Sop::Rotating { rate, block } => {
            let mut r = rng(seed);
            let axis = StokesVector::<f64>::random(&mut r);
            let v0 = JonesUnitary::<f64>::random(&mut r);
            let ts = w.sample_period();
            let mut x = Vec::with_capacity(w.len());
            let mut y = Vec::with_capacity(w.len());
            for start in (0..w.len()).step_by(*block) {
                let rot = JonesUnitary::from_axis_angle(&axis, rate * start as f64 * ts);
                let m = rot.compose(&v0).matrix().cast::<T>();
                for n in start..(start + block).min(w.len()) {
                    let o = m.apply([w.x[n], w.y[n]]);
                    x.push(o[0]);
                    y.push(o[1]);
                }
            }
            w.with_samples(x, y)
        }
    }
}

/// Per-bin PMD times CD operator at signed frequency `f`.
fn linear_operator(f: f64, k_cd: f64, dgd: f64, psp: &StokesVector<f64>) -> Mat2<f64> {
    let pmd = JonesUnitary::from_axis_angle(psp, 2.0 * PI * f * dgd).matrix();
    pmd.scale(Complex::from_polar(1.0, -k_cd * f * f))
}

fn cd_constant(dl: f64, wavelength: f64) -> f64 {
    PI * wavelength * wavelength * dl / SPEED_OF_LIGHT
}

/// Static CD and first-order PMD over the whole record (circular).
pub fn apply_linear<T: Real>(
    w: &DualPolWaveform<T>,
    dl: f64,
    wavelength: f64,
    dgd: f64,
    psp: &StokesVector<f64>,
) -> Result<DualPolWaveform<T>> {
    psp.validate()?;
    if dl == 0.0 && dgd == 0.0 {
        return Ok(w.clone());
    }
    let n = w.len();
    let k = cd_constant(dl, wavelength);
    let plan = FftPair::new(n);
    let mut x = w.x.clone();
    let mut y = w.y.clone();
    plan.forward(&mut x);
    plan.forward(&mut y);
    for i in 0..n {
        let h = linear_operator(bin_freq(i, n, w.sample_rate), k, dgd, psp).cast::<T>();
        let o = h.apply([x[i], y[i]]);
        x[i] = o[0];
        y[i] = o[1];
    }
    plan.inverse(&mut x);
    plan.inverse(&mut y);
    Ok(w.with_samples(x, y))
}

/// CD only.
pub fn apply_cd<T: Real>(
    w: &DualPolWaveform<T>,
    dl: f64,
    wavelength: f64,
) -> Result<DualPolWaveform<T>> {
    apply_linear(
        w,
        dl,
        wavelength,
        0.0,
        &StokesVector {
            p1: 1.0,
            p2: 0.0,
            p3: 0.0,
        },
    )
}

/// Removes accumulated dispersion `dl`.
pub fn cd_compensate<T: Real>(
    w: &DualPolWaveform<T>,
    dl: f64,
    wavelength: f64,
) -> Result<DualPolWaveform<T>> {
    apply_cd(w, -dl, wavelength)
}

/// Exact circular delay by `tau` seconds via the Fourier shift theorem.
pub fn apply_delay<T: Real>(w: &DualPolWaveform<T>, tau: f64) -> DualPolWaveform<T> {
    let n = w.len();
    let plan = FftPair::new(n);
    let mut x = w.x.clone();
    let mut y = w.y.clone();
    plan.forward(&mut x);
    plan.forward(&mut y);
    for i in 0..n {
        let f = bin_freq(i, n, w.sample_rate);
        // Nyquist bin of an even-length record has no defined sign
        let h: Complex<T> = if n % 2 == 0 && i == n / 2 {
            Complex::new(T::lit((PI * f * tau).cos()), T::zero())
        } else {
            cis(-2.0 * PI * f * tau)
        };
        x[i] = x[i] * h;
        y[i] = y[i] * h;
    }
    plan.inverse(&mut x);
    plan.inverse(&mut y);
    w.with_samples(x, y)
}

/// Orthonormal eigenvectors of `p . sigma` for eigenvalues `+1` and `-1`.
fn psp_basis(p: &StokesVector<f64>) -> [[Complex<f64>; 2]; 2] {
    let plus = if p.p1 > -0.5 {
        [Complex::new(p.p1 + 1.0, 0.0), Complex::new(p.p2, p.p3)]
    } else {
        [Complex::new(p.p2, -p.p3), Complex::new(1.0 - p.p1, 0.0)]
    };
    let n = (plus[0].norm_sqr() + plus[1].norm_sqr()).sqrt();
    let plus = [plus[0] / n, plus[1] / n];
    let minus = [-plus[1].conj(), plus[0].conj()];
    [plus, minus]
}

/// First-order PMD with a DGD that follows `sweep`, then static CD.
///
/// In the PSP eigenbasis the PMD operator is a differential delay of
/// `+dgd/2` and `-dgd/2`, so a slowly varying DGD becomes a time-varying
/// band-limited resampling of the two eigen-components.
pub fn apply_linear_varying<T: Real>(
    w: &DualPolWaveform<T>,
    dl: f64,
    wavelength: f64,
    sweep: &DgdSweep,
    psp: &StokesVector<f64>,
) -> Result<DualPolWaveform<T>> {
    psp.validate()?;
    let [ep, em] = psp_basis(psp);
    let (ep, em) = (
        ep.map(|z| Complex::new(T::lit(z.re), T::lit(z.im))),
        em.map(|z| Complex::new(T::lit(z.re), T::lit(z.im))),
    );
    let project = |e: &[Complex<T>; 2]| -> Vec<Complex<T>> {
        w.x.iter()
            .zip(&w.y)
            .map(|(&a, &b)| e[0].conj() * a + e[1].conj() * b)
            .collect()
    };
    let ts = w.sample_period();
    let fs = w.sample_rate;
    if sweep.max * fs / 2.0 >= (SINC_HALF - 2) as f64 {
        return invalid("DGD exceeds the interpolator support");
    }
    let half_delay = |n: usize| 0.5 * sweep.at(n as f64 * ts) * fs;
    let cp = resample_circular(&project(&ep), half_delay);
    let cm = resample_circular(&project(&em), |n| -half_delay(n));
    let x = cp
        .iter()
        .zip(&cm)
        .map(|(&a, &b)| ep[0] * a + em[0] * b)
        .collect();
    let y = cp
        .iter()
        .zip(&cm)
        .map(|(&a, &b)| ep[1] * a + em[1] * b)
        .collect();
    apply_cd(&w.with_samples(x, y), dl, wavelength)
}

/// Per-polarization complex noise variance for OSNR `osnr_db` given total
/// (both polarizations) signal power `power`:
/// `power * fs / (2 * OSNR * 12.5 GHz)`, split equally over I and Q.
pub fn ase_variance(power: f64, osnr_db: f64, sample_rate: f64) -> f64 {
    let osnr = 10f64.powf(osnr_db / 10.0);
    power * sample_rate / (2.0 * osnr * OSNR_REF_BANDWIDTH)
}

/// Circular complex Gaussian ASE referenced to the measured signal power.
pub fn add_ase<T: Real>(
    w: &DualPolWaveform<T>,
    osnr_db: f64,
    seed: u64,
) -> Result<DualPolWaveform<T>> {
    if osnr_db.is_nan() || osnr_db == f64::NEG_INFINITY {
        return invalid("osnr_db must be finite or +inf");
    }
    if osnr_db == f64::INFINITY {
        return Ok(w.clone());
    }
    let var = ase_variance(w.power(), osnr_db, w.sample_rate);
    let normal =
        Normal::new(0.0, (var / 2.0).sqrt()).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    let mut r = rng(seed);
    let mut noisy = |s: &[Complex<T>]| -> Vec<Complex<T>> {
        s.iter()
            .map(|&z| {
                z + Complex::new(T::lit(normal.sample(&mut r)), T::lit(normal.sample(&mut r)))
            })
            .collect()
    };
    let x = noisy(&w.x);
    let y = noisy(&w.y);
    Ok(w.with_samples(x, y))
}

/// Common Wiener phase noise with per-sample increment variance
/// `2 pi linewidth Ts`.
pub fn add_phase_noise<T: Real>(
    w: &DualPolWaveform<T>,
    linewidth: f64,
    seed: u64,
) -> Result<DualPolWaveform<T>> {
    if !(linewidth >= 0.0 && linewidth.is_finite()) {
        return invalid("linewidth must be >= 0");
    }
    if linewidth == 0.0 {
        return Ok(w.clone());
    }
    let sd = (2.0 * PI * linewidth / w.sample_rate).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    let mut r = rng(seed);
    let mut theta = 0.0;
    let mut x = Vec::with_capacity(w.len());
    let mut y = Vec::with_capacity(w.len());
    for (&a, &b) in w.x.iter().zip(&w.y) {
        theta += normal.sample(&mut r);
        let rot: Complex<T> = cis(theta);
        x.push(a * rot);
        y.push(b * rot);
    }
    Ok(w.with_samples(x, y))
}

const SINC_HALF: usize = 32;
const SINC_PHASES: usize = 256;

/// Blackman-Harris windowed-sinc polyphase table: row `p` holds the taps for
/// fractional position `p / SINC_PHASES` at offsets `-SINC_HALF+1 ..= SINC_HALF`.
fn sinc_table() -> Vec<[f64; 2 * SINC_HALF]> {
    let half = SINC_HALF as f64;
    (0..=SINC_PHASES)
        .map(|p| {
            let frac = p as f64 / SINC_PHASES as f64;
            let mut row = [0.0; 2 * SINC_HALF];
            for (i, tap) in row.iter_mut().enumerate() {
                let t = i as f64 - (half - 1.0) - frac;
                let u = (t + half) / (2.0 * half);
                let win = if (0.0..=1.0).contains(&u) {
                    let a = 2.0 * PI * u;
                    0.35875 - 0.48829 * a.cos() + 0.14128 * (2.0 * a).cos()
                        - 0.01168 * (3.0 * a).cos()
                } else {
                    0.0
                };
                let s = if t.abs() < 1e-12 {
                    1.0
                } else {
                    (PI * t).sin() / (PI * t)
                };
                *tap = s * win;
            }
            row
        })
        .collect()
}

/// Band-limited circular resampling: `out[n] = in(n - delay[n])` with delays
/// in samples.
pub fn resample_circular<T: Real>(
    s: &[Complex<T>],
    delay: impl Fn(usize) -> f64,
) -> Vec<Complex<T>> {
    let table = sinc_table();
    let n = s.len() as i64;
    (0..s.len())
        .map(|i| {
            let pos = i as f64 - delay(i);
            let base = pos.floor();
            let frac = (pos - base) * SINC_PHASES as f64;
            let p = (frac.floor() as usize).min(SINC_PHASES - 1);
            let w1 = frac - p as f64;
            let (r0, r1) = (&table[p], &table[p + 1]);
            let mut acc = Complex::new(T::zero(), T::zero());
            let first = base as i64 - (SINC_HALF as i64 - 1);
            for k in 0..2 * SINC_HALF {
                let h = T::lit(r0[k] * (1.0 - w1) + r1[k] * w1);
                acc += s[(first + k as i64).rem_euclid(n) as usize] * h;
            }
            acc
        })
        .collect()
}

/// Sampling-clock jitter with a random initial phase drawn from `seed`.
pub fn apply_jitter<T: Real>(
    w: &DualPolWaveform<T>,
    amplitude: f64,
    frequency: f64,
    seed: u64,
) -> Result<DualPolWaveform<T>> {
    let phase = rng(seed).random_range(0.0..2.0 * PI);
    apply_jitter_with_phase(w, amplitude, frequency, phase)
}

/// Samples the waveform at `n Ts - amplitude T0 sin(2 pi frequency n Ts + phase)`,
/// i.e. a time-varying delay of the signal.
pub fn apply_jitter_with_phase<T: Real>(
    w: &DualPolWaveform<T>,
    amplitude: f64,
    frequency: f64,
    phase: f64,
) -> Result<DualPolWaveform<T>> {
    if !(amplitude >= 0.0 && frequency >= 0.0 && phase.is_finite()) {
        return invalid("jitter amplitude and frequency must be >= 0");
    }
    let peak = amplitude * w.sps() as f64;
    if peak >= (SINC_HALF - 2) as f64 {
        return invalid(format!(
            "jitter peak of {peak} samples exceeds the interpolator support"
        ));
    }
    if amplitude == 0.0 {
        return Ok(w.clone());
    }
    let ts = w.sample_period();
    let delay = |n: usize| peak * (2.0 * PI * frequency * n as f64 * ts + phase).sin();
    Ok(w.with_samples(
        resample_circular(&w.x, delay),
        resample_circular(&w.y, delay),
    ))
}
