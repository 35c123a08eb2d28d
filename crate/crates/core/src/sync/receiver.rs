//! Minimal coherent receiver: 2x2 butterfly LMS equalizer with an embedded
//! first-order decision-directed PLL, and bit-error counting against the
//! transmitted symbols.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::waveform::{generate_symbol_indices, Constellation, DualPolWaveform};

type C = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spacing {
    /// One tap per symbol (uses the symbol-centre samples only).
    Symbol,
    /// One tap per sample of the 2-sample-per-symbol input.
    Fractional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverConfig {
    /// Taps per butterfly branch (odd).
    pub taps: usize,
    pub spacing: Spacing,
    pub step: f64,
    /// Symbols ignored before training starts (timing acquisition).
    pub start: usize,
    /// Known symbols used for training before switching to decisions.
    pub pilots: usize,
    /// Decision-directed symbols skipped before counting errors.
    pub discard: usize,
    pub pll_gain: f64,
    /// Largest frame offset (symbols) searched at start-up.
    pub max_lag: usize,
    /// Symbols per realignment window when counting errors.
    pub window: usize,
}

impl ReceiverConfig {
    pub fn new(taps: usize, spacing: Spacing) -> Self {
        Self {
            taps,
            spacing,
            step: 1e-3,
            start: 0,
            pilots: 2000,
            discard: 1000,
            pll_gain: 0.05,
            max_lag: 16,
            window: 1024,
        }
    }

    /// 7 taps at one sample per symbol.
    pub fn symbol_spaced() -> Self {
        Self::new(7, Spacing::Symbol)
    }

    /// 13 taps at two samples per symbol.
    pub fn fractional_spaced() -> Self {
        Self::new(13, Spacing::Fractional)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 || self.taps % 2 == 0 {
            return invalid(format!(
                "equalizer needs an odd number of taps, got {}",
                self.taps
            ));
        }
        if !(self.step > 0.0 && self.step < 1.0) {
            return invalid(format!("LMS step must lie in (0, 1), got {}", self.step));
        }
        if !(self.pll_gain > 0.0 && self.pll_gain < 1.0) {
            return invalid(format!(
                "PLL gain must lie in (0, 1), got {}",
                self.pll_gain
            ));
        }
        if self.pilots == 0 || self.window == 0 {
            return invalid("pilot count and realignment window must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverReport {
    /// Decided constellation indices per polarization, aligned to the
    /// transmitted symbol index (zero before `start`).
    pub decisions: [Vec<usize>; 2],
    /// Frame offset found at start-up, symbols.
    pub lag: i64,
    pub bits: u64,
    pub bit_errors: u64,
    pub symbol_errors: u64,
}

impl ReceiverReport {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }
}

/// Regenerates the transmitted symbols from `seed` and runs [`receive_reference`].
pub fn receive<T: Real>(
    w: &DualPolWaveform<T>,
    cfg: &ReceiverConfig,
    seed: u64,
    constellation: &Constellation<f64>,
) -> Result<ReceiverReport> {
    let count = w.len() / w.sps();
    let (a, b) = generate_symbol_indices(seed, count, constellation.len())?;
    receive_reference(w, cfg, [&a, &b], constellation)
}

fn centre_samples<T: Real>(s: &[Complex<T>], sps: usize, scale: f64) -> Vec<C> {
    s.iter()
        .step_by(sps)
        .map(|z| C::new(z.re.as_f64(), z.im.as_f64()) * scale)
        .collect()
}

/// Frame offset maximizing the correlation of the symbol-centre samples with
/// reference symbols `start..start + span`, summed over all polarization pairs.
fn frame_lag(
    centres: [&[C]; 2],
    refs: [&[C]; 2],
    start: usize,
    span: usize,
    max_lag: usize,
) -> i64 {
    let n = centres[0].len() as i64;
    let mut best = (f64::NEG_INFINITY, 0i64);
    for lag in -(max_lag as i64)..=max_lag as i64 {
        let mut metric = 0.0;
        for c in centres {
            for r in refs {
                let acc: C = (start..start + span)
                    .map(|k| c[(k as i64 + lag).rem_euclid(n) as usize] * r[k].conj())
                    .sum();
                metric += acc.norm_sqr();
            }
        }
        if metric > best.0 {
            best = (metric, lag);
        }
    }
    best.1
}

/// Equalizes `w` (2 samples per symbol, symbol `k` nominally at sample `2k`)
/// from symbol `cfg.start` on and counts bit errors against `reference` after
/// the pilot and discard periods. Errors are counted per window after realigning frame offset
/// (within 2 symbols) and quadrant rotation, so cycle slips cost one window
/// of errors instead of the rest of the record.
pub fn receive_reference<T: Real>(
    w: &DualPolWaveform<T>,
    cfg: &ReceiverConfig,
    reference: [&[usize]; 2],
    constellation: &Constellation<f64>,
) -> Result<ReceiverReport> {
    cfg.validate()?;
    w.validate()?;
    let sps = w.sps();
    let count = w.len() / sps;
    if reference[0].len() < count || reference[1].len() < count {
        return invalid(format!("reference needs {count} symbols per polarization"));
    }
    if count <= cfg.start + cfg.pilots + cfg.discard {
        return invalid(format!(
            "{count} symbols leave nothing to count after start {}, {} pilots and {} discarded",
            cfg.start, cfg.pilots, cfg.discard
        ));
    }
    let power = w.power() / 2.0;
    if !(power > 0.0) {
        return invalid("receiver input has no power");
    }
    let scale = 1.0 / power.sqrt();
    let points = constellation.points();
    let refs: [Vec<C>; 2] = reference.map(|r| r[..count].iter().map(|&i| points[i]).collect());

    let centres = [
        centre_samples(&w.x, sps, scale),
        centre_samples(&w.y, sps, scale),
    ];
    let lag = frame_lag(
        [&centres[0], &centres[1]],
        [&refs[0], &refs[1]],
        cfg.start,
        cfg.pilots,
        cfg.max_lag,
    );

    let (input, step, per_symbol) = match cfg.spacing {
        Spacing::Symbol => (centres, 1i64, 1i64),
        Spacing::Fractional => (
            [
                w.x.iter()
                    .map(|z| C::new(z.re.as_f64(), z.im.as_f64()) * scale)
                    .collect(),
                w.y.iter()
                    .map(|z| C::new(z.re.as_f64(), z.im.as_f64()) * scale)
                    .collect(),
            ],
            1,
            sps as i64,
        ),
    };
    let n_in = input[0].len() as i64;
    let half = (cfg.taps / 2) as i64;
    let mut h = [
        [vec![C::default(); cfg.taps], vec![C::default(); cfg.taps]],
        [vec![C::default(); cfg.taps], vec![C::default(); cfg.taps]],
    ];
    h[0][0][half as usize] = C::new(1.0, 0.0);
    h[1][1][half as usize] = C::new(1.0, 0.0);
    let mut theta = 0.0f64;
    let mut decisions = [vec![0usize; count], vec![0usize; count]];
    let mut u = [vec![C::default(); cfg.taps], vec![C::default(); cfg.taps]];

    for k in cfg.start..count {
        let centre = (k as i64 + lag) * per_symbol;
        for p in 0..2 {
            for (j, slot) in u[p].iter_mut().enumerate() {
                *slot = input[p][(centre + (j as i64 - half) * step).rem_euclid(n_in) as usize];
            }
        }
        let rot = C::from_polar(1.0, -theta);
        let mut z = [C::default(); 2];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut acc = C::default();
            for p in 0..2 {
                acc += h[o][p].iter().zip(&u[p]).map(|(a, b)| a * b).sum::<C>();
            }
            *zo = acc * rot;
        }
        let pw = z[0].norm_sqr() + z[1].norm_sqr();
        if !pw.is_finite() || pw > 1e3 {
            return Err(Error::EqualizerDiverged {
                symbol: k,
                power: pw,
            });
        }
        let mut pd = C::default();
        for o in 0..2 {
            let idx = constellation.nearest(z[o]);
            decisions[o][k] = idx;
            let d = if k < cfg.start + cfg.pilots {
                refs[o][k]
            } else {
                points[idx]
            };
            pd += z[o] * d.conj();
            let e = (d - z[o]) * rot.conj() * cfg.step;
            for p in 0..2 {
                for (hj, uj) in h[o][p].iter_mut().zip(&u[p]) {
                    *hj += e * uj.conj();
                }
            }
        }
        if pd.norm_sqr() > 0.0 {
            theta += cfg.pll_gain * pd.arg();
        }
    }

    let (bit_errors, symbol_errors, counted) =
        count_errors(&decisions, reference, constellation, cfg);
    Ok(ReceiverReport {
        decisions,
        lag,
        bits: counted as u64 * 2 * constellation.bits_per_symbol() as u64,
        bit_errors,
        symbol_errors,
    })
}

fn count_errors(
    decisions: &[Vec<usize>; 2],
    reference: [&[usize]; 2],
    constellation: &Constellation<f64>,
    cfg: &ReceiverConfig,
) -> (u64, u64, usize) {
    // Point indices are the Gray bit labels, so the Hamming distance of two
    // indices counts bit errors.
    let points = constellation.points();
    // Index of each point after a quarter-turn rotation, for r = 0..3 turns.
    let quarter = Complex::new(0.0, 1.0);
    let rotations: Vec<Vec<usize>> = (0..4)
        .map(|r| {
            points
                .iter()
                .map(|&p| constellation.nearest(p * quarter.powi(r)))
                .collect()
        })
        .collect();
    let count = decisions[0].len();
    let start = cfg.start + cfg.pilots + cfg.discard;
    let (mut bits, mut syms) = (0u64, 0u64);
    let mut w0 = start;
    while w0 < count {
        let w1 = (w0 + cfg.window).min(count);
        let mut best = (u64::MAX, 0u64);
        for shift in -2i64..=2 {
            for rot in &rotations {
                let (mut be, mut se) = (0u64, 0u64);
                for k in w0..w1 {
                    let r = (k as i64 + shift).rem_euclid(count as i64) as usize;
                    for p in 0..2 {
                        let got = rot[decisions[p][k]];
                        let want = reference[p][r];
                        if got != want {
                            se += 1;
                            be += u64::from((got ^ want).count_ones());
                        }
                    }
                }
                if be < best.0 {
                    best = (be, se);
                }
            }
        }
        bits += best.0;
        syms += best.1;
        w0 = w1;
    }
    (bits, syms, count - start)
}
