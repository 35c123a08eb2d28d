//! Timing-error detectors.
//!
//! Second-order detectors read the phase of a baud-rate spectral line. For a
//! residual delay `tau` the undistorted cyclic matrix is about
//! `e^{-j phi0} I` with `phi0 = 2 pi alpha tau`, so every detector here
//! reports `e_t = -Im{...}`, which is `+sin(phi0)` (or `sin(2 phi0)`) and has a
//! positive-slope zero at the correct sampling phase.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::cyclostats::CyclicMatrixEstimate;
use crate::error::{invalid, Result};
use crate::fft::FftPair;
use crate::jones::Mat2;
use crate::scalar::{wrap_pi, Real};

type C = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Detector {
    Square,
    /// Single-polarization `P'_xx` (baseline that PMD can blind).
    Pxx,
    Trace,
    TraceU,
    Det,
    ClockTone,
    Adaptive,
    FourthOrder(FourthOrderVariant),
}

impl Detector {
    pub const ALL: [Detector; 11] = [
        Detector::Square,
        Detector::Pxx,
        Detector::Trace,
        Detector::TraceU,
        Detector::Det,
        Detector::ClockTone,
        Detector::Adaptive,
        Detector::FourthOrder(FourthOrderVariant::PowerDifference),
        Detector::FourthOrder(FourthOrderVariant::Correlation),
        Detector::FourthOrder(FourthOrderVariant::Moeneclaey),
        Detector::FourthOrder(FourthOrderVariant::ReCombination),
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Detector::Square => "square",
            Detector::Pxx => "pxx",
            Detector::Trace => "trace",
            Detector::TraceU => "trace_u",
            Detector::Det => "det",
            Detector::ClockTone => "clock_tone",
            Detector::Adaptive => "adaptive",
            Detector::FourthOrder(v) => v.name(),
        }
    }

    /// S-curve period in unit intervals.
    pub fn period_ui(&self) -> f64 {
        match self {
            Detector::Det | Detector::ClockTone => 0.5,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TedReading {
    pub e_t: f64,
    /// In-phase part of the same statistic.
    pub aux_real: f64,
    pub detector: Detector,
}

impl TedReading {
    fn from_value(v: C, detector: Detector) -> Self {
        Self {
            e_t: -v.im,
            aux_real: v.re,
            detector,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.e_t.is_finite() && self.aux_real.is_finite()
    }

    /// Modulus of the underlying complex statistic.
    pub fn magnitude(&self) -> f64 {
        self.e_t.hypot(self.aux_real)
    }
}

fn widen<T: Real>(z: Complex<T>) -> C {
    C::new(z.re.as_f64(), z.im.as_f64())
}

/// Dual-polarization square-law clock tone
/// `(1/N) sum (|x|^2 + |y|^2) e^{-j 2 pi alpha n Ts}`.
///
/// Needs at least 3 samples per symbol (4 in practice): at 2 the baud-rate
/// line of `|x|^2` falls on the Nyquist bin and is real.
pub fn ted_square<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
) -> Result<TedReading> {
    if x.len() != y.len() || x.is_empty() {
        return invalid("square TED needs equal, non-empty blocks");
    }
    let mut acc = C::default();
    for (n, (a, b)) in x.iter().zip(y).enumerate() {
        let p = (a.norm_sqr() + b.norm_sqr()).as_f64();
        acc += C::from_polar(p, -2.0 * PI * alpha * n as f64 / sample_rate);
    }
    Ok(TedReading::from_value(
        acc / x.len() as f64,
        Detector::Square,
    ))
}

/// `-Im{P'_xx}`.
pub fn ted_pxx<T: Real>(c: &CyclicMatrixEstimate<T>) -> TedReading {
    TedReading::from_value(widen(c.m.get(0, 0)), Detector::Pxx)
}

/// `-Im{tr C}`: invariant to any polarization rotation `V C V^H`.
pub fn ted_trace<T: Real>(c: &CyclicMatrixEstimate<T>) -> TedReading {
    TedReading::from_value(widen(c.m.trace()), Detector::Trace)
}

/// `-Im{tr(C U^H)}` with a PMD matrix estimate `u_hat`.
pub fn ted_trace_u<T: Real>(c: &CyclicMatrixEstimate<T>, u_hat: &Mat2<f64>) -> TedReading {
    let v = (c.m.cast::<f64>() * u_hat.adjoint()).trace();
    TedReading::from_value(v, Detector::TraceU)
}

/// `-Im{det C}`, about `sin(2 phi0)`; invariant to det-1 unitaries on either
/// side. Two lock points per unit interval.
pub fn ted_det<T: Real>(c: &CyclicMatrixEstimate<T>) -> TedReading {
    TedReading::from_value(widen(c.m.det()), Detector::Det)
}

/// `F = F_xx F_yy - F_xy F_yx`, with `F_ab` the spectrum of `a conj(b)`.
/// Its line at the baud rate carries `-2 phi0` and survives PMD.
pub fn clock_tone_spectrum<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if x.len() != y.len() || x.is_empty() {
        return invalid("clock tone needs equal, non-empty blocks");
    }
    let n = x.len();
    let plan = FftPair::<T>::new(n);
    let spec = |f: &dyn Fn(usize) -> Complex<T>| {
        let mut v: Vec<Complex<T>> = (0..n).map(f).collect();
        plan.forward(&mut v);
        v
    };
    let fxx = spec(&|i| x[i] * x[i].conj());
    let fyy = spec(&|i| y[i] * y[i].conj());
    let fxy = spec(&|i| x[i] * y[i].conj());
    let fyx = spec(&|i| y[i] * x[i].conj());
    let s = T::lit(1.0 / (n as f64 * n as f64));
    Ok((0..n)
        .map(|k| (fxx[k] * fyy[k] - fxy[k] * fyx[k]) * s)
        .collect())
}

/// Reading from the clock-tone determinant at the baud-rate bin.
pub fn ted_clock_tone<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    alpha: f64,
    sample_rate: f64,
) -> Result<TedReading> {
    let f = clock_tone_spectrum(x, y)?;
    let b = crate::cyclostats::cyclic_bin(x.len(), alpha, sample_rate)?;
    Ok(TedReading::from_value(widen(f[b]), Detector::ClockTone))
}

/// Phases that rotate the off-diagonal and `yy` terms onto the real axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveTedState {
    pub phi_xy: f64,
    pub phi_yx: f64,
    pub phi_yy: f64,
    pub mu: f64,
}

impl AdaptiveTedState {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return invalid(format!("adaptive TED step must lie in (0, 1), got {mu}"));
        }
        Ok(Self {
            phi_xy: 0.0,
            phi_yx: 0.0,
            phi_yy: 0.0,
            mu,
        })
    }

    /// Largest `|Im(e^{j phi_l} P'_l)|` over the adapted terms.
    pub fn residual<T: Real>(&self, c: &CyclicMatrixEstimate<T>) -> f64 {
        let m = c.m.cast::<f64>();
        [
            (self.phi_xy, m.get(0, 1)),
            (self.phi_yx, m.get(1, 0)),
            (self.phi_yy, m.get(1, 1)),
        ]
        .iter()
        .map(|&(phi, p)| (C::from_polar(1.0, phi) * p).im.abs())
        .fold(0.0, f64::max)
    }
}

/// `q = P'_xx + e^{j phi_xy} P'_xy + e^{j phi_yx} P'_yx + e^{j phi_yy} P'_yy`,
/// `e_t = -Im q`, and `phi_l <- phi_l - mu Im(e^{j phi_l} P'_l)`.
pub fn ted_adaptive<T: Real>(
    state: &AdaptiveTedState,
    c: &CyclicMatrixEstimate<T>,
) -> (TedReading, AdaptiveTedState) {
    let m = c.m.cast::<f64>();
    let terms = [
        (state.phi_xy, m.get(0, 1)),
        (state.phi_yx, m.get(1, 0)),
        (state.phi_yy, m.get(1, 1)),
    ];
    let rotated: Vec<C> = terms
        .iter()
        .map(|&(phi, p)| C::from_polar(1.0, phi) * p)
        .collect();
    let q = m.get(0, 0) + rotated.iter().sum::<C>();
    let next = AdaptiveTedState {
        phi_xy: wrap_pi(state.phi_xy - state.mu * rotated[0].im),
        phi_yx: wrap_pi(state.phi_yx - state.mu * rotated[1].im),
        phi_yy: wrap_pi(state.phi_yy - state.mu * rotated[2].im),
        mu: state.mu,
    };
    (TedReading::from_value(q, Detector::Adaptive), next)
}

/// Fourth-order detectors operating on 2-sample-per-symbol streams, with
/// `x_{2k}` the sample nominally at symbol `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FourthOrderVariant {
    /// `sum p_{2k} (p_{2k+1} - p_{2k-1})`, `p = |x|^2 + |y|^2`.
    PowerDifference,
    /// `sum x_{2k} x*_{2k+1} (x_{2k+1} x*_{2k+2} - x_{2k-1} x*_{2k})` plus the `y` term.
    Correlation,
    /// `sum x_k x*_{k+1} (|x_k|^2 - |x_{k+1}|^2)` over symbol-aligned `k`.
    Moeneclaey,
    /// `Re[(x*_{-1} + x*_0)(x_0 + x_1)((x_{-2} + x_{-1})(x*_{-1} + x*_0) - (x_0 + x_1)(x*_1 + x*_2))]`.
    ReCombination,
}

impl FourthOrderVariant {
    pub const ALL: [FourthOrderVariant; 4] = [
        FourthOrderVariant::PowerDifference,
        FourthOrderVariant::Correlation,
        FourthOrderVariant::Moeneclaey,
        FourthOrderVariant::ReCombination,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FourthOrderVariant::PowerDifference => "fourth_power_difference",
            FourthOrderVariant::Correlation => "fourth_correlation",
            FourthOrderVariant::Moeneclaey => "fourth_moeneclaey",
            FourthOrderVariant::ReCombination => "fourth_recombination",
        }
    }

    /// Sign making the S-curve rise through its lock point, like the
    /// second-order detectors.
    fn orientation(&self) -> f64 {
        match self {
            FourthOrderVariant::PowerDifference | FourthOrderVariant::Moeneclaey => -1.0,
            FourthOrderVariant::Correlation | FourthOrderVariant::ReCombination => 1.0,
        }
    }

    /// Signal delay, in unit intervals, at which the detector has its
    /// rising zero when `x_{2k}` is the sample grid point. The two lag-product
    /// formulas are centred on the pair `(x_{2k}, x_{2k+1})`, so they lock a
    /// quarter symbol away from the power-based ones.
    pub fn lock_offset_ui(&self) -> f64 {
        match self {
            FourthOrderVariant::PowerDifference | FourthOrderVariant::ReCombination => 0.0,
            FourthOrderVariant::Correlation | FourthOrderVariant::Moeneclaey => -0.25,
        }
    }

    /// Single-polarization formula on one stream, summed over symbols.
    fn single(&self, s: &[C]) -> C {
        let n = s.len();
        let m = n / 2;
        let mut acc = C::default();
        for k in 1..m.saturating_sub(1) {
            let i = 2 * k;
            let v = match self {
                FourthOrderVariant::PowerDifference => C::new(
                    s[i].norm_sqr() * (s[i + 1].norm_sqr() - s[i - 1].norm_sqr()),
                    0.0,
                ),
                FourthOrderVariant::Correlation => {
                    s[i] * s[i + 1].conj() * (s[i + 1] * s[i + 2].conj() - s[i - 1] * s[i].conj())
                }
                FourthOrderVariant::Moeneclaey => {
                    s[i] * s[i + 1].conj() * (s[i].norm_sqr() - s[i + 1].norm_sqr())
                }
                FourthOrderVariant::ReCombination => {
                    let a = s[i - 1].conj() + s[i].conj();
                    let b = s[i] + s[i + 1];
                    let c = s[i - 2] + s[i - 1];
                    let d = s[i + 1].conj() + s[i + 2].conj();
                    C::new((a * b * (c * a - b * d)).re, 0.0)
                }
            };
            acc += v;
        }
        acc
    }
}

/// Evaluates a fourth-order detector. `PowerDifference` and `Correlation` are
/// dual-polarization by construction; `Moeneclaey` and `ReCombination` use
/// `x` only unless `dual_pol` adds the same formula on `y`.
///
/// `e_t` is the real part of the (normalized) sum and `aux_real` the
/// imaginary part.
pub fn ted_fourth_order<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    variant: FourthOrderVariant,
    dual_pol: bool,
) -> Result<TedReading> {
    if x.len() != y.len() || x.len() < 8 || x.len() % 2 != 0 {
        return invalid("fourth-order TED needs equal even-length blocks of at least 8 samples");
    }
    let xs: Vec<C> = x.iter().map(|&z| widen(z)).collect();
    let ys: Vec<C> = y.iter().map(|&z| widen(z)).collect();
    let v = match variant {
        FourthOrderVariant::PowerDifference => {
            let p: Vec<C> = xs
                .iter()
                .zip(&ys)
                .map(|(a, b)| C::new((a.norm_sqr() + b.norm_sqr()).sqrt(), 0.0))
                .collect();
            variant.single(&p)
        }
        FourthOrderVariant::Correlation => variant.single(&xs) + variant.single(&ys),
        _ if dual_pol => variant.single(&xs) + variant.single(&ys),
        _ => variant.single(&xs),
    };
    let m = (x.len() / 2 - 2) as f64;
    let v = v / m * variant.orientation();
    Ok(TedReading {
        e_t: v.re,
        aux_real: v.im,
        detector: Detector::FourthOrder(variant),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::{JonesUnitary, StokesVector};
    use crate::scalar::cis;
    use rand::SeedableRng;

    const ALPHA: f64 = 32e9;

    fn est(m: Mat2<f64>) -> CyclicMatrixEstimate<f64> {
        CyclicMatrixEstimate::new(m, ALPHA)
    }

    #[test]
    fn trace_examples() {
        assert_eq!(ted_trace(&est(Mat2::identity().scale_re(2.0))).e_t, 0.0);
        // trace 2 e^{-j pi/4}
        let r = ted_trace(&est(Mat2::identity().scale(cis(-PI / 4.0))));
        assert!((r.e_t - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.aux_real - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_u_identity() {
        let p = StokesVector::normalized(0.2, 0.3, 0.9).unwrap();
        let u = JonesUnitary::from_axis_angle(&p, 1.3).matrix();
        let phi0 = 0.7;
        let r = ted_trace_u(&est(u.scale(cis(-phi0))), &u);
        assert!((r.e_t - 2.0 * phi0.sin()).abs() < 1e-12);
    }

    #[test]
    fn det_examples() {
        assert_eq!(ted_det(&est(Mat2::identity())).e_t, 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let u = JonesUnitary::<f64>::random(&mut rng).matrix();
            let r = ted_det(&est(u.scale(cis(-PI / 8.0))));
            assert!((r.e_t - (PI / 4.0).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_on_identity() {
        let s = AdaptiveTedState {
            phi_xy: 0.4,
            phi_yx: -0.2,
            phi_yy: 0.3,
            mu: 0.05,
        };
        let (r, next) = ted_adaptive(&s, &est(Mat2::identity()));
        assert!((r.e_t + (1.0 + cis::<f64>(0.3)).im).abs() < 1e-15);
        assert_eq!(next.phi_xy, 0.4);
        assert_eq!(next.phi_yx, -0.2);
        assert!((next.phi_yy - (0.3 - 0.05 * 0.3f64.sin())).abs() < 1e-15);
        assert!(AdaptiveTedState::new(0.0).is_err() && AdaptiveTedState::new(1.0).is_err());
    }

    #[test]
    fn adaptive_converges_on_static_matrix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = JonesUnitary::<f64>::random(&mut rng)
            .matrix()
            .scale(cis(-0.3));
        let c = est(u);
        let mut s = AdaptiveTedState::new(0.05).unwrap();
        for _ in 0..500 {
            s = ted_adaptive(&s, &c).1;
        }
        assert!(s.residual(&c) < 1e-3, "{}", s.residual(&c));
    }

    #[test]
    fn fourth_order_constant_and_swap() {
        let x = vec![C::new(0.7, -0.2); 64];
        let y = vec![C::new(-0.1, 0.4); 64];
        let r = ted_fourth_order(&x, &y, FourthOrderVariant::PowerDifference, false).unwrap();
        assert_eq!(r.e_t, 0.0);
        let xs: Vec<C> = (0..64).map(|i| cis((i * i) as f64 * 0.37)).collect();
        let ys: Vec<C> = (0..64).map(|i| cis(i as f64 * 1.1) * 0.5).collect();
        for v in [
            FourthOrderVariant::PowerDifference,
            FourthOrderVariant::Correlation,
        ] {
            let a = ted_fourth_order(&xs, &ys, v, false).unwrap();
            let b = ted_fourth_order(&ys, &xs, v, false).unwrap();
            assert!((a.e_t - b.e_t).abs() < 1e-12 && (a.aux_real - b.aux_real).abs() < 1e-12);
        }
        assert!(
            ted_fourth_order(&xs[..7], &ys[..7], FourthOrderVariant::Moeneclaey, false).is_err()
        );
    }

    #[test]
    fn clock_tone_reduces_to_product_without_pmd() {
        let n = 64;
        let x: Vec<C> = (0..n)
            .map(|i| C::new(1.0 + 0.5 * (PI * i as f64 / 2.0).cos(), 0.0))
            .collect();
        let y = vec![C::default(); n];
        let f = clock_tone_spectrum(&x, &y).unwrap();
        assert!(f.iter().all(|z| z.norm() < 1e-12));
        let y = x.clone();
        let f = clock_tone_spectrum(&x, &y).unwrap();
        // x and y identical: F_xx F_yy = F_xy F_yx, so F vanishes too
        assert!(f.iter().all(|z| z.norm() < 1e-12));
    }
}
