//! Transmitter, channel and receiver chain shared by the subcommands.

use std::f64::consts::PI;

use cyclosync::channel::{apply_channel, cd_compensate, cd_delay, dl_from_delay, ChannelSpec};
use cyclosync::cyclostats::{caf_matrix_band, Band};
use cyclosync::estimators::estimate_cd_robust;
use cyclosync::jones::StokesVector;
use cyclosync::seed::{derive_seed, rng};
use cyclosync::sync::{
    receive, track_and_retime, LoopConfig, ReceiverConfig, ReceiverReport, TrackRecord,
};
use cyclosync::ted::Detector;
use cyclosync::waveform::{
    generate_symbols, matched_filter, synthesize_periodic, DualPolWaveform, PulseShape,
};
use rand::Rng;

use crate::config::ScenarioSpec;
use crate::error::CliError;

/// Span used only by the matched filter; the transmitter is exact.
const PULSE_SPAN: usize = 64;

/// Symbols in the block used for CD estimation.
const CD_BLOCK_SYMBOLS: usize = 2048;

pub fn uniform_phase(seed: u64, index: u64) -> f64 {
    rng(derive_seed(seed, index)).random_range(0.0..2.0 * PI)
}

pub fn random_psp(seed: u64) -> StokesVector<f64> {
    StokesVector::random(&mut rng(seed))
}

/// The spec's PSP, or a uniform draw from `seed`.
pub fn psp_for(spec: &ScenarioSpec, seed: u64) -> StokesVector<f64> {
    match spec.channel.psp {
        Some([a, b, c]) => StokesVector::new(a, b, c).expect("validated"),
        None => random_psp(seed),
    }
}

pub fn pulse(spec: &ScenarioSpec) -> Result<PulseShape, CliError> {
    Ok(PulseShape::rrc(spec.rolloff, PULSE_SPAN)?)
}

/// Periodic transmitter output for the symbols drawn from `symbol_seed`.
pub fn transmit(
    spec: &ScenarioSpec,
    symbol_seed: u64,
    tau_g: f64,
) -> Result<DualPolWaveform<f64>, CliError> {
    let c = spec.constellation();
    let (a, b) = generate_symbols(symbol_seed, spec.symbol_count, &c)?;
    Ok(synthesize_periodic(
        &a,
        &b,
        &pulse(spec)?,
        spec.sps,
        tau_g,
        spec.baud_rate,
    )?)
}

/// Seeds of one Monte-Carlo point: symbols, channel noise, PSP draw.
#[derive(Clone, Copy, Debug)]
pub struct PointSeeds {
    pub symbols: u64,
    pub channel: u64,
    pub psp: u64,
}

impl PointSeeds {
    pub fn new(point: u64) -> Self {
        Self {
            symbols: derive_seed(point, 0),
            channel: derive_seed(point, 1),
            psp: derive_seed(point, 2),
        }
    }
}

/// CD estimated from the first block of the record, s/m.
pub fn estimate_cd(spec: &ScenarioSpec, w: &DualPolWaveform<f64>) -> Result<f64, CliError> {
    let mut n = (CD_BLOCK_SYMBOLS * spec.sps).min(w.len());
    n = 1 << n.ilog2();
    let block = w.with_samples(w.x[..n].to_vec(), w.y[..n].to_vec());
    let caf = caf_matrix_band(&block, n, spec.baud_rate, Band::for_rolloff(spec.rolloff))?;
    let est = estimate_cd_robust(&caf, spec.wavelength())?;
    Ok(dl_from_delay(
        est.tau_refined,
        spec.wavelength(),
        spec.baud_rate,
    ))
}

pub struct Received {
    /// CD-compensated and matched-filtered samples.
    pub waveform: DualPolWaveform<f64>,
    pub channel: ChannelSpec,
    pub dl_hat: f64,
}

/// Transmitter, channel, CD estimation and compensation, matched filter.
pub fn front_end(
    spec: &ScenarioSpec,
    seeds: PointSeeds,
    osnr_db: Option<f64>,
) -> Result<Received, CliError> {
    let tx = transmit(spec, seeds.symbols, 0.0)?;
    let ch = spec.channel_spec(
        seeds.channel,
        psp_for(spec, seeds.psp),
        spec.channel.dgd_ps,
        osnr_db,
    );
    let rx = apply_channel(&tx, &ch)?;
    let dl_hat = estimate_cd(spec, &rx)?;
    let comp = cd_compensate(&rx, dl_hat, spec.wavelength())?;
    Ok(Received {
        waveform: matched_filter(&comp, &pulse(spec)?),
        channel: ch,
        dl_hat,
    })
}

pub fn loop_config(spec: &ScenarioSpec, detector: Detector) -> LoopConfig {
    let mut cfg = LoopConfig::new(detector);
    cfg.kp = spec.tracking.kp;
    cfg.ki = spec.tracking.ki;
    cfg.block_len = spec.block_len;
    cfg.cyclic = cyclosync::cyclostats::CyclicConfig::for_rolloff(spec.rolloff);
    cfg.initial_phase = spec.tracking.initial_phase_ui;
    cfg
}

/// Timing recovery followed by every configured receiver.
pub fn back_end(
    spec: &ScenarioSpec,
    rx: &Received,
    detector: Detector,
    symbol_seed: u64,
    receivers: &[(String, ReceiverConfig)],
) -> Result<(TrackRecord, Vec<ReceiverReport>), CliError> {
    let (record, retimed) = track_and_retime(&rx.waveform, &loop_config(spec, detector), 0.0)?;
    let start = spec.tracking.acquisition_blocks * spec.block_len;
    let constellation = spec.constellation();
    let reports = receivers
        .iter()
        .map(|(_, cfg)| {
            let mut cfg = cfg.clone();
            cfg.start = start;
            receive(&retimed, &cfg, symbol_seed, &constellation).map_err(CliError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((record, reports))
}

/// CD delay used for de-rotation when the record is not compensated.
pub fn tau_cd(spec: &ScenarioSpec) -> f64 {
    cd_delay(spec.cd_total(), spec.wavelength(), spec.baud_rate)
}
