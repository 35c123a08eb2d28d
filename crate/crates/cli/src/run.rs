//! Subcommand runners. Each returns a [`Table`]; sweep points run in parallel
//! with per-point seeds derived from the master seed, and rows are emitted in
//! point order.

use cyclosync::channel::{apply_channel, cd_compensate, dl_from_delay};
use cyclosync::cyclostats::{
    caf_matrix, caf_matrix_band, estimate_cyclic_matrix, Band, CyclicConfig, CyclicMatrixEstimate,
};
use cyclosync::estimators::{estimate_cd_robust, estimate_cd_single, estimate_pmd, CdEstimate};
use cyclosync::jones::{JonesUnitary, Mat2};
use cyclosync::oracle::{caf_direct, cyclic_matrix_direct};
use cyclosync::seed::{derive_seed, rng};
use cyclosync::ted::{
    ted_adaptive, ted_clock_tone, ted_det, ted_fourth_order, ted_pxx, ted_square, ted_trace,
    ted_trace_u, AdaptiveTedState, Detector, TedReading,
};
use cyclosync::waveform::{matched_filter, DualPolWaveform};
use rayon::prelude::*;

use crate::config::{Command, ScenarioSpec};
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::pipeline::{self, PointSeeds};
use crate::stats;

/// Adaptive-detector iterations per S-curve point.
const ADAPTIVE_ITERATIONS: usize = 500;

/// Bootstrap resamples for BER confidence intervals.
const BOOTSTRAP_RESAMPLES: usize = 2000;

pub fn run(cmd: Command, spec: &ScenarioSpec) -> Result<Table, CliError> {
    spec.validate(cmd)?;
    match cmd {
        Command::Scurve => run_scurve(spec),
        Command::CdSweep => run_cd_sweep(spec),
        Command::DgdSweep => run_dgd_sweep(spec),
        Command::Track => run_track(spec),
        Command::Ber => run_ber(spec),
        Command::Selftest => run_selftest(spec),
    }
}

fn cyclic_config(spec: &ScenarioSpec) -> CyclicConfig {
    CyclicConfig::for_rolloff(spec.rolloff)
}

/// Reads every detector on one received record. Matrix detectors use the CD
/// de-rotation; sample-domain detectors see the CD-compensated record (and the
/// fourth-order ones its matched-filter output).
pub fn read_detectors(
    spec: &ScenarioSpec,
    rx: &DualPolWaveform<f64>,
    detectors: &[Detector],
) -> Result<Vec<TedReading>, CliError> {
    let nb = spec.block_len * spec.sps;
    let c = estimate_cyclic_matrix(rx, nb, cyclic_config(spec), pipeline::tau_cd(spec))?;
    let needs_samples = detectors.iter().any(|d| {
        matches!(
            d,
            Detector::Square | Detector::ClockTone | Detector::FourthOrder(_)
        )
    });
    let comp = if needs_samples {
        Some(cd_compensate(rx, spec.cd_total(), spec.wavelength())?)
    } else {
        None
    };
    let mf = match (
        &comp,
        detectors
            .iter()
            .any(|d| matches!(d, Detector::FourthOrder(_))),
    ) {
        (Some(w), true) => Some(matched_filter(w, &pipeline::pulse(spec)?)),
        _ => None,
    };
    detectors
        .iter()
        .map(|&d| {
            Ok(match d {
                Detector::Pxx => ted_pxx(&c),
                Detector::Trace => ted_trace(&c),
                Detector::Det => ted_det(&c),
                Detector::TraceU => ted_trace_u(&c, &estimate_pmd(&c)?.u_hat.matrix()),
                Detector::Adaptive => adaptive_reading(&c)?,
                Detector::Square => {
                    let w = comp.as_ref().expect("computed");
                    ted_square(&w.x, &w.y, spec.baud_rate, spec.sample_rate())?
                }
                Detector::ClockTone => {
                    let w = comp.as_ref().expect("computed");
                    ted_clock_tone(&w.x, &w.y, spec.baud_rate, spec.sample_rate())?
                }
                Detector::FourthOrder(v) => {
                    let w = mf.as_ref().expect("computed");
                    ted_fourth_order(&w.x, &w.y, v, false)?
                }
            })
        })
        .collect()
}

fn adaptive_reading(c: &CyclicMatrixEstimate<f64>) -> Result<TedReading, CliError> {
    let mut state = AdaptiveTedState::new(0.05)?;
    let mut reading = ted_adaptive(&state, c).0;
    for _ in 0..ADAPTIVE_ITERATIONS {
        let (r, next) = ted_adaptive(&state, c);
        reading = r;
        state = next;
    }
    Ok(reading)
}

/// Columns: detector, tau_g_ui, e_t, aux_real.
pub fn run_scurve(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let grid = spec.sweep.tau_g.as_ref().expect("validated").values();
    let detectors = spec.detector_list();
    let seeds = PointSeeds::new(derive_seed(spec.seed, 1));
    let psp = pipeline::psp_for(spec, seeds.psp);
    let ch = spec.channel_spec(
        seeds.channel,
        psp,
        spec.channel.dgd_ps,
        spec.channel.osnr_db,
    );
    let t0 = spec.symbol_period();
    let readings: Vec<Vec<TedReading>> = grid
        .par_iter()
        .map(|&tau| {
            let tx = pipeline::transmit(spec, seeds.symbols, tau * t0)?;
            let rx = apply_channel(&tx, &ch)?;
            read_detectors(spec, &rx, &detectors)
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&["detector", "tau_g_ui", "e_t", "aux_real"]);
    for (di, d) in detectors.iter().enumerate() {
        for (tau, r) in grid.iter().zip(&readings) {
            t.push(vec![
                d.name().into(),
                (*tau).into(),
                r[di].e_t.into(),
                r[di].aux_real.into(),
            ]);
        }
    }
    Ok(t)
}

fn ns_per_nm(dl: f64) -> f64 {
    // s/m and ns/nm coincide numerically.
    dl
}

/// Columns: draw, p1, p2, p3, dgd_ps, estimator, dl_hat_ns_nm, error_ns_nm,
/// refined_error_ns_nm, grid_step_ns_nm, peak_to_median, low_confidence.
/// `dl_hat` is the grid peak; the refined error uses the parabolic peak.
pub fn run_cd_sweep(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let draws = spec.sweep.psp_draws.expect("validated");
    let osnr = spec.channel.osnr_db;
    let rows: Vec<Vec<Vec<Cell>>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let seeds = PointSeeds::new(derive_seed(spec.seed, i as u64 + 1));
            let psp = pipeline::psp_for(spec, seeds.psp);
            let tx = pipeline::transmit(spec, seeds.symbols, 0.0)?;
            let ch = spec.channel_spec(seeds.channel, psp, spec.channel.dgd_ps, osnr);
            let rx = apply_channel(&tx, &ch)?;
            let caf = caf_matrix_band(
                &rx,
                rx.len(),
                spec.baud_rate,
                Band::for_rolloff(spec.rolloff),
            )?;
            let step = ns_per_nm(dl_from_delay(
                caf.grid_step(),
                spec.wavelength(),
                spec.baud_rate,
            ));
            let mut out = Vec::new();
            for (name, est) in [
                ("single", estimate_cd_single(&caf, spec.wavelength())?),
                ("robust", estimate_cd_robust(&caf, spec.wavelength())?),
            ] {
                let CdEstimate {
                    dl,
                    tau_refined,
                    peak_to_median,
                    low_confidence,
                    ..
                } = est;
                let refined = ns_per_nm(dl_from_delay(
                    tau_refined,
                    spec.wavelength(),
                    spec.baud_rate,
                ));
                out.push(vec![
                    i.into(),
                    psp.p1.into(),
                    psp.p2.into(),
                    psp.p3.into(),
                    spec.channel.dgd_ps.into(),
                    name.into(),
                    ns_per_nm(dl).into(),
                    (ns_per_nm(dl) - spec.channel.cd_ns_per_nm).into(),
                    (refined - spec.channel.cd_ns_per_nm).into(),
                    step.into(),
                    peak_to_median.into(),
                    low_confidence.into(),
                ]);
            }
            Ok(out)
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&[
        "draw",
        "p1",
        "p2",
        "p3",
        "dgd_ps",
        "estimator",
        "dl_hat_ns_nm",
        "error_ns_nm",
        "refined_error_ns_nm",
        "grid_step_ns_nm",
        "peak_to_median",
        "low_confidence",
    ]);
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

/// Columns: dgd_ps, draw, p1, p2, p3, dgd_hat_ps, psp_error_deg, low_confidence.
/// `psp_error_deg` is NaN when the PSP is indeterminate.
pub fn run_dgd_sweep(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let grid = spec.sweep.dgd_ps.clone().expect("validated");
    let draws = spec.sweep.psp_draws.unwrap_or(1);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|j| (0..draws).map(move |i| (j, i)))
        .collect();
    let nb = spec.block_len * spec.sps;
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(j, i)| {
            let dgd_ps = grid[j];
            let seeds =
                PointSeeds::new(derive_seed(derive_seed(spec.seed, j as u64 + 1), i as u64));
            let psp = pipeline::psp_for(spec, seeds.psp);
            let tx = pipeline::transmit(spec, seeds.symbols, 0.0)?;
            let ch = spec.channel_spec(seeds.channel, psp, dgd_ps, spec.channel.osnr_db);
            let rx = apply_channel(&tx, &ch)?;
            let c = estimate_cyclic_matrix(&rx, nb, cyclic_config(spec), pipeline::tau_cd(spec))?;
            let est = estimate_pmd(&c)?;
            let err = est
                .psp_hat
                .map(|p| {
                    let dot = p.p1 * psp.p1 + p.p2 * psp.p2 + p.p3 * psp.p3;
                    dot.clamp(-1.0, 1.0).acos().to_degrees()
                })
                .unwrap_or(f64::NAN);
            Ok(vec![
                dgd_ps.into(),
                i.into(),
                psp.p1.into(),
                psp.p2.into(),
                psp.p3.into(),
                (est.dgd_hat * 1e12).into(),
                err.into(),
                est.low_confidence.into(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&[
        "dgd_ps",
        "draw",
        "p1",
        "p2",
        "p3",
        "dgd_hat_ps",
        "psp_error_deg",
        "low_confidence",
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Columns: detector, block, time_s, phase_ui, unwrapped_ui, error_ui, e_t,
/// strength, locked, branch, injected_ui, dgd_ps.
pub fn run_track(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let seeds = PointSeeds::new(derive_seed(spec.seed, 1));
    let rx = pipeline::front_end(spec, seeds, spec.channel.osnr_db)?;
    let detectors = spec.detector_list();
    let records = detectors
        .par_iter()
        .map(|&d| {
            cyclosync::sync::track(&rx.waveform, &pipeline::loop_config(spec, d), 0.0)
                .map_err(CliError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jitter_phase = rx.channel.jitter_phase();
    let mut t = Table::new(&[
        "detector",
        "block",
        "time_s",
        "phase_ui",
        "unwrapped_ui",
        "error_ui",
        "e_t",
        "strength",
        "locked",
        "branch",
        "injected_ui",
        "dgd_ps",
    ]);
    for (d, rec) in detectors.iter().zip(&records) {
        let unwrapped = rec.unwrapped_phases();
        for (k, (p, u)) in rec.points.iter().zip(&unwrapped).enumerate() {
            let injected = match (rx.channel.jitter, jitter_phase) {
                (Some(j), Some(ph)) => j.offset_ui(p.time, ph),
                _ => 0.0,
            };
            let dgd = rx
                .channel
                .dgd_sweep
                .map(|s| s.at(p.time))
                .unwrap_or(rx.channel.dgd);
            t.push(vec![
                d.name().into(),
                k.into(),
                p.time.into(),
                p.phase.into(),
                (*u).into(),
                p.error.into(),
                p.e_t.into(),
                p.strength.into(),
                p.locked.into(),
                (p.branch as usize).into(),
                injected.into(),
                (dgd * 1e12).into(),
            ]);
        }
    }
    Ok(t)
}

/// Columns: kind (`run` or `summary`), osnr_db, run, detector, receiver, bits,
/// bit_errors, ber, ci_low, ci_high. Summary rows pool all runs; the interval
/// is a 95% bootstrap over runs.
pub fn run_ber(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let osnrs: Vec<Option<f64>> = match &spec.sweep.osnr_db {
        Some(g) => g.iter().map(|&o| Some(o)).collect(),
        None => vec![spec.channel.osnr_db],
    };
    let detectors = spec.detector_list();
    let receivers = spec.receiver_configs();
    let jobs: Vec<(usize, usize)> = (0..osnrs.len())
        .flat_map(|o| (0..spec.runs).map(move |r| (o, r)))
        .collect();
    // results[job][detector][receiver] = (bits, errors)
    let results: Vec<Vec<Vec<(u64, u64)>>> = jobs
        .par_iter()
        .map(|&(o, r)| {
            let seeds =
                PointSeeds::new(derive_seed(derive_seed(spec.seed, o as u64 + 1), r as u64));
            let rx = pipeline::front_end(spec, seeds, osnrs[o])?;
            detectors
                .iter()
                .map(|&d| {
                    let (_, reports) = pipeline::back_end(spec, &rx, d, seeds.symbols, &receivers)?;
                    Ok(reports
                        .iter()
                        .map(|rep| (rep.bits, rep.bit_errors))
                        .collect())
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, CliError>>()?;

    let mut t = Table::new(&[
        "kind",
        "osnr_db",
        "run",
        "detector",
        "receiver",
        "bits",
        "bit_errors",
        "ber",
        "ci_low",
        "ci_high",
    ]);
    let osnr_cell = |o: Option<f64>| Cell::Float(o.unwrap_or(f64::INFINITY));
    for (ji, &(o, r)) in jobs.iter().enumerate() {
        for (di, d) in detectors.iter().enumerate() {
            for (ri, (label, _)) in receivers.iter().enumerate() {
                let (bits, errs) = results[ji][di][ri];
                t.push(vec![
                    "run".into(),
                    osnr_cell(osnrs[o]),
                    r.into(),
                    d.name().into(),
                    label.clone().into(),
                    bits.into(),
                    errs.into(),
                    (errs as f64 / bits as f64).into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                ]);
            }
        }
    }
    for (o, &osnr) in osnrs.iter().enumerate() {
        let idx: Vec<usize> = jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.0 == o)
            .map(|(i, _)| i)
            .collect();
        for (di, d) in detectors.iter().enumerate() {
            for (ri, (label, _)) in receivers.iter().enumerate() {
                let per_run: Vec<(u64, u64)> = idx.iter().map(|&i| results[i][di][ri]).collect();
                let pooled = |sel: &[usize]| {
                    let (b, e) = sel.iter().fold((0u64, 0u64), |acc, &k| {
                        (acc.0 + per_run[k].0, acc.1 + per_run[k].1)
                    });
                    e as f64 / b as f64
                };
                let all: Vec<usize> = (0..per_run.len()).collect();
                let seed = derive_seed(spec.seed, 1_000_000 + (o * 10_000 + di * 100 + ri) as u64);
                let dist = stats::bootstrap(per_run.len(), BOOTSTRAP_RESAMPLES, seed, pooled);
                let bits: u64 = per_run.iter().map(|p| p.0).sum();
                let errs: u64 = per_run.iter().map(|p| p.1).sum();
                t.push(vec![
                    "summary".into(),
                    osnr_cell(osnr),
                    (-1i64).into(),
                    d.name().into(),
                    label.clone().into(),
                    bits.into(),
                    errs.into(),
                    pooled(&all).into(),
                    stats::quantile(&dist, 0.025).into(),
                    stats::quantile(&dist, 0.975).into(),
                ]);
            }
        }
    }
    Ok(t)
}

/// Oracle-equivalence and invariance checks. Columns: check, max_error,
/// tolerance, pass.
pub fn run_selftest(spec: &ScenarioSpec) -> Result<Table, CliError> {
    let mut t = Table::new(&["check", "max_error", "tolerance", "pass"]);
    for (name, err, tol) in selftest_checks(spec.seed)? {
        t.push(vec![
            name.into(),
            err.into(),
            tol.into(),
            (err < tol).into(),
        ]);
    }
    Ok(t)
}

/// `(name, max error, tolerance)` of each self-test.
pub fn selftest_checks(seed: u64) -> Result<Vec<(&'static str, f64, f64)>, CliError> {
    let spec = ScenarioSpec::from_json(&format!(
        r#"{{"seed": {seed}, "symbol_count": 256, "channel": {{"cd_ns_per_nm": 0.4, "dgd_ps": 9.0}}}}"#
    ))?;
    let seeds = PointSeeds::new(derive_seed(seed, 1));
    let tx = pipeline::transmit(&spec, seeds.symbols, 0.13 / spec.baud_rate)?;
    let ch = spec.channel_spec(
        seeds.channel,
        pipeline::psp_for(&spec, seeds.psp),
        9.0,
        None,
    );
    let rx = apply_channel(&tx, &ch)?;
    let (alpha, fs) = (spec.baud_rate, spec.sample_rate());

    let caf = caf_matrix(&rx, rx.len(), alpha)?;
    let direct = caf_direct(&rx.x, &rx.y, alpha, fs);
    let scale = direct.iter().map(|m| m.frobenius()).fold(0.0, f64::max);
    let caf_err = caf
        .entries
        .iter()
        .zip(&direct)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max)
        / scale;

    let tau = pipeline::tau_cd(&spec);
    let cfg = CyclicConfig {
        normalization: cyclosync::cyclostats::Normalization::None,
        ..cyclic_config(&spec)
    };
    let fast = estimate_cyclic_matrix(&rx, rx.len(), cfg, tau)?.m;
    let slow = cyclic_matrix_direct(&rx.x, &rx.y, alpha, fs, spec.rolloff / 2.0, tau);
    let cm_err = fast.max_abs_diff(&slow) / slow.frobenius();

    let (tr, det, col) = invariance_errors(derive_seed(seed, 2), 1000, &fast);
    Ok(vec![
        ("caf_fft_vs_direct", caf_err, 1e-9),
        ("cyclic_matrix_fft_vs_direct", cm_err, 1e-9),
        ("trace_conjugation_invariance", tr, 1e-12),
        ("det_unitary_invariance", det, 1e-12),
        ("column_energy_invariance", col, 1e-12),
    ])
}

/// Largest relative deviations of `tr(V C V^H)`, `det(U C V)` and the column
/// energies of `U C` from their values on `c`, over `count` random
/// det-1 unitaries.
pub fn invariance_errors(seed: u64, count: usize, c: &Mat2<f64>) -> (f64, f64, f64) {
    let mut r = rng(seed);
    let (tr0, det0) = (c.trace(), c.det());
    let col0 = [c.column_energy(0), c.column_energy(1)];
    let (mut e_tr, mut e_det, mut e_col) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..count {
        let u = JonesUnitary::<f64>::random(&mut r).matrix();
        let v = JonesUnitary::<f64>::random(&mut r).matrix();
        e_tr = e_tr.max(((v * *c * v.adjoint()).trace() - tr0).norm() / tr0.norm().max(1e-300));
        e_det = e_det.max(((u * *c * v).det() - det0).norm() / det0.norm().max(1e-300));
        let uc = u * *c;
        for (k, &e0) in col0.iter().enumerate() {
            e_col = e_col.max((uc.column_energy(k) - e0).abs() / e0.max(1e-300));
        }
    }
    (e_tr, e_det, e_col)
}
