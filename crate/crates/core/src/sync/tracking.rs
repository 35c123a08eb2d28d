//! Block-wise feedback timing recovery.
//!
//! Each block of `block_len` symbols is resampled at the current timing
//! estimate, the cyclic matrix of the resampled block is evaluated with the
//! CD de-rotation, and the detector reading is turned into a phase error
//! `atan2(e_t, aux_real) / (2 pi)` in unit intervals (halved for `det`). A PI
//! filter then updates the estimate for the next block.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::cyclostats::{CyclicConfig, CyclicEstimator, CyclicMatrixEstimate};
use crate::error::{invalid, Error, Result};
use crate::estimators::estimate_pmd;
use crate::jones::Mat2;
use crate::scalar::{wrap_ui, Real};
use crate::sync::interp::interpolate_at;
use crate::ted::{
    ted_adaptive, ted_det, ted_pxx, ted_trace, ted_trace_u, AdaptiveTedState, Detector, TedReading,
};
use crate::waveform::DualPolWaveform;

/// Forgetting factor of the running cyclic-matrix average that feeds the
/// PMD estimate of the `trace_u` loop.
const PMD_AVERAGING: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub kp: f64,
    pub ki: f64,
    /// Symbols per detector evaluation; `block_len * sps` must be a power of two.
    pub block_len: usize,
    pub detector: Detector,
    pub cyclic: CyclicConfig,
    /// Phase-error bound (UI) that must hold for `lock_blocks` blocks.
    pub lock_threshold: f64,
    pub lock_blocks: usize,
    /// Minimum reading magnitude relative to an undistorted channel.
    pub min_strength: f64,
    /// Step of the adaptive detector.
    pub adaptive_mu: f64,
    /// Starting timing estimate, UI.
    pub initial_phase: f64,
}

impl LoopConfig {
    pub fn new(detector: Detector) -> Self {
        Self {
            kp: 0.05,
            ki: 0.002,
            block_len: 512,
            detector,
            cyclic: CyclicConfig::default(),
            lock_threshold: 0.05,
            lock_blocks: 10,
            min_strength: 0.5,
            adaptive_mu: 0.05,
            initial_phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.kp.is_finite()) {
            return invalid(format!("kp must be positive, got {}", self.kp));
        }
        if !(self.ki >= 0.0 && self.ki.is_finite()) {
            return invalid(format!("ki must be non-negative, got {}", self.ki));
        }
        if self.block_len < 64 {
            return invalid(format!(
                "block_len must be at least 64 symbols, got {}",
                self.block_len
            ));
        }
        if !(self.lock_threshold > 0.0 && self.min_strength >= 0.0 && self.lock_blocks > 0) {
            return invalid("lock threshold, strength and block count must be positive");
        }
        if !self.initial_phase.is_finite() {
            return invalid("initial phase must be finite");
        }
        match self.detector {
            Detector::Pxx | Detector::Trace | Detector::TraceU | Detector::Det => Ok(()),
            Detector::Adaptive => AdaptiveTedState::new(self.adaptive_mu).map(|_| ()),
            d => invalid(format!(
                "detector {} is not supported in the tracking loop",
                d.name()
            )),
        }
    }

    /// Reading magnitude of an undistorted, band-normalized channel.
    fn reference_magnitude(&self) -> f64 {
        match self.detector {
            Detector::Trace | Detector::TraceU | Detector::Adaptive => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    /// Centre time of the block, s.
    pub time: f64,
    /// Timing estimate applied to this block, wrapped to `[-0.5, 0.5)` UI.
    pub phase: f64,
    pub e_t: f64,
    /// Phase error derived from the reading, UI.
    pub error: f64,
    /// Reading magnitude relative to an undistorted channel.
    pub strength: f64,
    pub locked: bool,
    /// Half-UI branch of the estimate (`0` for `[-0.25, 0.25)` mod 1 UI).
    /// Distinguishes the two lock points of `det`.
    pub branch: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub detector: Detector,
    pub block_len: usize,
    pub points: Vec<TrackPoint>,
    /// Number of divergence resets.
    pub resets: usize,
}

impl TrackRecord {
    pub fn phases(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.phase).collect()
    }

    /// Phase trajectory with the 1-UI wraps removed.
    pub fn unwrapped_phases(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for p in &self.points {
            if let Some(q) = prev {
                let d = p.phase - q;
                offset -= d.round();
            }
            out.push(p.phase + offset);
            prev = Some(p.phase);
        }
        out
    }

    /// Fraction of blocks from `skip` onwards that carry the lock flag.
    pub fn locked_fraction(&self, skip: usize) -> f64 {
        let tail = self.points.get(skip..).unwrap_or(&[]);
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|p| p.locked).count() as f64 / tail.len() as f64
    }

    /// Branch of the last locked block, if any.
    pub fn lock_branch(&self) -> Option<u8> {
        self.points
            .iter()
            .rev()
            .find(|p| p.locked)
            .map(|p| p.branch)
    }
}

struct LoopState {
    phase: f64,
    integrator: f64,
    adaptive: AdaptiveTedState,
    pmd_avg: Option<Mat2<f64>>,
    streak: usize,
}

fn reading<T: Real>(
    cfg: &LoopConfig,
    st: &mut LoopState,
    c: &CyclicMatrixEstimate<T>,
) -> Result<TedReading> {
    Ok(match cfg.detector {
        Detector::Pxx => ted_pxx(c),
        Detector::Trace => ted_trace(c),
        Detector::Det => ted_det(c),
        Detector::Adaptive => {
            let (r, next) = ted_adaptive(&st.adaptive, c);
            st.adaptive = next;
            r
        }
        Detector::TraceU => {
            let m = c.m.cast::<f64>();
            let avg = match st.pmd_avg {
                Some(a) => a.scale_re(1.0 - PMD_AVERAGING) + m.scale_re(PMD_AVERAGING),
                None => m,
            };
            st.pmd_avg = Some(avg);
            let mut smoothed = CyclicMatrixEstimate::new(avg, c.alpha);
            smoothed.tau = c.tau;
            let u_hat = estimate_pmd(&smoothed)?.u_hat;
            ted_trace_u(c, &u_hat.matrix())
        }
        _ => unreachable!("validated"),
    })
}

/// Runs the loop and returns the record together with the retimed waveform,
/// whose block `k` is the input resampled at the estimate applied to it.
pub fn track_and_retime<T: Real>(
    w: &DualPolWaveform<T>,
    cfg: &LoopConfig,
    tau_cd: f64,
) -> Result<(TrackRecord, DualPolWaveform<T>)> {
    cfg.validate()?;
    w.validate()?;
    if !tau_cd.is_finite() {
        return invalid("tau_cd must be finite");
    }
    let sps = w.sps();
    let nb = cfg.block_len * sps;
    if !nb.is_power_of_two() {
        return invalid(format!("block of {} samples is not a power of two", nb));
    }
    let n_blocks = w.len() / nb;
    if n_blocks == 0 {
        return invalid(format!("record shorter than one block of {nb} samples"));
    }
    let mut est = CyclicEstimator::<T>::new(nb, w.baud_rate, w.sample_rate, cfg.cyclic)?;
    let period_scale = if cfg.detector == Detector::Det {
        2.0
    } else {
        1.0
    };
    let reference = cfg.reference_magnitude();
    let mut st = LoopState {
        phase: cfg.initial_phase,
        integrator: 0.0,
        adaptive: AdaptiveTedState::new(if cfg.detector == Detector::Adaptive {
            cfg.adaptive_mu
        } else {
            0.05
        })?,
        pmd_avg: None,
        streak: 0,
    };
    let mut points = Vec::with_capacity(n_blocks);
    let mut resets = 0;
    let zero = Complex::new(T::zero(), T::zero());
    let (mut out_x, mut out_y) = (vec![zero; w.len()], vec![zero; w.len()]);
    out_x[n_blocks * nb..].copy_from_slice(&w.x[n_blocks * nb..]);
    out_y[n_blocks * nb..].copy_from_slice(&w.y[n_blocks * nb..]);

    for k in 0..n_blocks {
        let start = k * nb;
        let offset = st.phase * sps as f64;
        for n in start..start + nb {
            let t = n as f64 + offset;
            out_x[n] = interpolate_at(&w.x, t);
            out_y[n] = interpolate_at(&w.y, t);
        }
        let c = est.block(&out_x[start..start + nb], &out_y[start..start + nb], tau_cd)?;
        let r = reading(cfg, &mut st, &c)?;
        if !r.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite detector reading in block {k}"
            )));
        }
        let error = r.e_t.atan2(r.aux_real) / (2.0 * PI * period_scale);
        let strength = r.magnitude() / reference;

        st.streak = if error.abs() < cfg.lock_threshold && strength >= cfg.min_strength {
            st.streak + 1
        } else {
            0
        };
        let applied = st.phase;
        points.push(TrackPoint {
            time: (start as f64 + nb as f64 / 2.0) / w.sample_rate,
            phase: wrap_ui(applied),
            e_t: r.e_t,
            error,
            strength,
            locked: st.streak >= cfg.lock_blocks,
            branch: u8::from((applied + 0.25).rem_euclid(1.0) >= 0.5),
        });

        st.integrator += cfg.ki * error;
        let next = st.phase + cfg.kp * error + st.integrator;
        if !next.is_finite() || (next - st.phase).abs() > 1.0 {
            st.integrator = 0.0;
            st.streak = 0;
            st.pmd_avg = None;
            resets += 1;
            if let Some(p) = points.last_mut() {
                p.locked = false;
            }
        } else {
            st.phase = next;
        }
    }

    let record = TrackRecord {
        detector: cfg.detector,
        block_len: cfg.block_len,
        points,
        resets,
    };
    Ok((record, w.with_samples(out_x, out_y)))
}

/// Runs the timing loop over every complete block of `w`.
pub fn track<T: Real>(
    w: &DualPolWaveform<T>,
    cfg: &LoopConfig,
    tau_cd: f64,
) -> Result<TrackRecord> {
    track_and_retime(w, cfg, tau_cd).map(|(r, _)| r)
}
