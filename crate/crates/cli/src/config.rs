//! Scenario configuration (JSON) and its validation.

use cyclosync::channel::{ChannelSpec, DgdSweep, Jitter, Sop};
use cyclosync::jones::StokesVector;
use cyclosync::sync::{ReceiverConfig, Spacing};
use cyclosync::ted::Detector;
use cyclosync::waveform::Constellation;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const PS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "defaults::modulation")]
    pub modulation: String,
    #[serde(default = "defaults::baud_rate")]
    pub baud_rate: f64,
    #[serde(default = "defaults::sps")]
    pub sps: usize,
    #[serde(default = "defaults::rolloff")]
    pub rolloff: f64,
    #[serde(default = "defaults::symbol_count")]
    pub symbol_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default = "defaults::detectors")]
    pub detectors: Vec<String>,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Symbols per cyclic-statistics block.
    #[serde(default = "defaults::block_len")]
    pub block_len: usize,
    #[serde(default)]
    pub tracking: TrackingConfig,
    #[serde(default = "defaults::receivers")]
    pub receivers: Vec<ReceiverSpec>,
    /// Monte-Carlo repetitions (ber).
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    /// Output file name inside the output directory.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub cd_ns_per_nm: f64,
    #[serde(default = "defaults::wavelength_nm")]
    pub wavelength_nm: f64,
    #[serde(default)]
    pub dgd_ps: f64,
    /// Fixed PSP; drawn uniformly on the sphere from the point seed when absent.
    #[serde(default)]
    pub psp: Option<[f64; 3]>,
    #[serde(default)]
    pub dgd_sweep: Option<DgdSweepConfig>,
    #[serde(default)]
    pub sop_rate_rad_s: f64,
    #[serde(default = "defaults::sop_block")]
    pub sop_block: usize,
    /// `null` means noiseless.
    #[serde(default)]
    pub osnr_db: Option<f64>,
    #[serde(default)]
    pub linewidth_hz: f64,
    #[serde(default)]
    pub jitter: Option<JitterConfig>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            cd_ns_per_nm: 0.0,
            wavelength_nm: defaults::wavelength_nm(),
            dgd_ps: 0.0,
            psp: None,
            dgd_sweep: None,
            sop_rate_rad_s: 0.0,
            sop_block: defaults::sop_block(),
            osnr_db: None,
            linewidth_hz: 0.0,
            jitter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgdSweepConfig {
    pub min_ps: f64,
    pub max_ps: f64,
    pub frequency_hz: f64,
    /// Drawn from the point seed when absent.
    #[serde(default)]
    pub phase_rad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterConfig {
    pub amplitude_ui: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub tau_g: Option<Grid>,
    #[serde(default)]
    pub dgd_ps: Option<Vec<f64>>,
    #[serde(default)]
    pub psp_draws: Option<usize>,
    #[serde(default)]
    pub osnr_db: Option<Vec<f64>>,
}

/// `points` values from `start_ui` to `stop_ui`, stop excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start_ui: f64,
    pub stop_ui: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop_ui - self.start_ui) / self.points as f64;
        (0..self.points)
            .map(|i| self.start_ui + i as f64 * step)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    #[serde(default = "defaults::kp")]
    pub kp: f64,
    #[serde(default = "defaults::ki")]
    pub ki: f64,
    #[serde(default)]
    pub initial_phase_ui: f64,
    /// Blocks ignored by the receiver while the loop acquires.
    #[serde(default = "defaults::acquisition_blocks")]
    pub acquisition_blocks: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            kp: defaults::kp(),
            ki: defaults::ki(),
            initial_phase_ui: 0.0,
            acquisition_blocks: defaults::acquisition_blocks(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub taps: usize,
    /// `symbol` or `fractional`.
    pub spacing: String,
}

impl ReceiverSpec {
    pub fn label(&self) -> String {
        format!("{}-{}", self.spacing, self.taps)
    }
}

mod defaults {
    use super::ReceiverSpec;

    pub fn modulation() -> String {
        "16qam".into()
    }
    pub fn baud_rate() -> f64 {
        32e9
    }
    pub fn sps() -> usize {
        2
    }
    pub fn rolloff() -> f64 {
        0.1
    }
    pub fn symbol_count() -> usize {
        4096
    }
    pub fn detectors() -> Vec<String> {
        vec!["trace".into(), "det".into()]
    }
    pub fn block_len() -> usize {
        512
    }
    pub fn runs() -> usize {
        1
    }
    pub fn wavelength_nm() -> f64 {
        1550.0
    }
    pub fn sop_block() -> usize {
        1024
    }
    pub fn kp() -> f64 {
        0.05
    }
    pub fn ki() -> f64 {
        0.002
    }
    pub fn acquisition_blocks() -> usize {
        100
    }
    pub fn receivers() -> Vec<ReceiverSpec> {
        vec![
            ReceiverSpec {
                taps: 7,
                spacing: "symbol".into(),
            },
            ReceiverSpec {
                taps: 13,
                spacing: "fractional".into(),
            },
        ]
    }
}

fn config(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn finite(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(config(path, format!("must be finite, got {v}")))
    }
}

/// Which parts of the spec a subcommand reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Scurve,
    CdSweep,
    DgdSweep,
    Track,
    Ber,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scurve => "scurve",
            Command::CdSweep => "cd-sweep",
            Command::DgdSweep => "dgd-sweep",
            Command::Track => "track",
            Command::Ber => "ber",
            Command::Selftest => "selftest",
        }
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            config(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    /// Canonical JSON of the resolved spec (all defaults filled in).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.baud_rate
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud_rate * self.sps as f64
    }

    pub fn wavelength(&self) -> f64 {
        self.channel.wavelength_nm * 1e-9
    }

    /// Accumulated dispersion in s/m.
    pub fn cd_total(&self) -> f64 {
        self.channel.cd_ns_per_nm
    }

    pub fn constellation(&self) -> Constellation<f64> {
        Constellation::by_name(&self.modulation).expect("validated")
    }

    pub fn detector_list(&self) -> Vec<Detector> {
        self.detectors
            .iter()
            .map(|d| Detector::from_name(d).expect("validated"))
            .collect()
    }

    pub fn receiver_configs(&self) -> Vec<(String, ReceiverConfig)> {
        self.receivers
            .iter()
            .map(|r| {
                let spacing = if r.spacing == "symbol" {
                    Spacing::Symbol
                } else {
                    Spacing::Fractional
                };
                (r.label(), ReceiverConfig::new(r.taps, spacing))
            })
            .collect()
    }

    /// Channel for one sweep point; `psp` is used when the spec leaves it open.
    pub fn channel_spec(
        &self,
        seed: u64,
        psp: StokesVector<f64>,
        dgd_ps: f64,
        osnr_db: Option<f64>,
    ) -> ChannelSpec {
        let ch = &self.channel;
        ChannelSpec {
            cd_total: self.cd_total(),
            wavelength: self.wavelength(),
            dgd: dgd_ps * PS,
            psp,
            dgd_sweep: ch.dgd_sweep.as_ref().map(|s| DgdSweep {
                min: s.min_ps * PS,
                max: s.max_ps * PS,
                frequency: s.frequency_hz,
                phase: s
                    .phase_rad
                    .unwrap_or_else(|| crate::pipeline::uniform_phase(seed, 5)),
            }),
            sop: if ch.sop_rate_rad_s == 0.0 {
                Sop::default()
            } else {
                Sop::Rotating {
                    rate: ch.sop_rate_rad_s,
                    block: ch.sop_block,
                }
            },
            osnr_db: osnr_db.unwrap_or(f64::INFINITY),
            linewidth: ch.linewidth_hz,
            jitter: ch.jitter.as_ref().map(|j| Jitter {
                amplitude: j.amplitude_ui,
                frequency: j.frequency_hz,
                phase: j.phase_rad,
            }),
            seed,
        }
    }

    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        if Constellation::<f64>::by_name(&self.modulation).is_err() {
            return Err(config(
                "modulation",
                format!("unknown modulation `{}`", self.modulation),
            ));
        }
        finite("baud_rate", self.baud_rate)?;
        if self.baud_rate <= 0.0 {
            return Err(config("baud_rate", "must be positive"));
        }
        if self.sps < 2 {
            return Err(config("sps", "need at least 2 samples per symbol"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(config("rolloff", "must lie in (0, 1]"));
        }
        if self.symbol_count < 64 {
            return Err(config("symbol_count", "need at least 64 symbols"));
        }
        if self.detectors.is_empty() {
            return Err(config("detectors", "must not be empty"));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            let path = format!("detectors[{i}]");
            let det = Detector::from_name(d).ok_or_else(|| {
                let names: Vec<_> = Detector::ALL.iter().map(|d| d.name()).collect();
                config(
                    &path,
                    format!(
                        "unknown detector `{d}` (expected one of {})",
                        names.join(", ")
                    ),
                )
            })?;
            match det {
                Detector::Square if self.sps < 4 => {
                    return Err(config(
                        path,
                        "square detector needs sps >= 4 (at 2 the clock line sits on Nyquist)",
                    ))
                }
                Detector::FourthOrder(_) if self.sps != 2 => {
                    return Err(config(
                        path,
                        "fourth-order detectors are defined for sps = 2",
                    ))
                }
                _ => {}
            }
            if matches!(cmd, Command::Track | Command::Ber)
                && !matches!(
                    det,
                    Detector::Pxx
                        | Detector::Trace
                        | Detector::TraceU
                        | Detector::Det
                        | Detector::Adaptive
                )
            {
                return Err(config(
                    path,
                    format!("detector `{d}` cannot drive the tracking loop"),
                ));
            }
        }
        let nb = self.block_len * self.sps;
        if self.block_len < 64 || !nb.is_power_of_two() {
            return Err(config(
                "block_len",
                "need >= 64 symbols and a power-of-two sample count",
            ));
        }
        self.validate_channel()?;
        let t = &self.tracking;
        finite("tracking.kp", t.kp)?;
        finite("tracking.ki", t.ki)?;
        finite("tracking.initial_phase_ui", t.initial_phase_ui)?;
        if t.kp <= 0.0 {
            return Err(config("tracking.kp", "must be positive"));
        }
        if t.ki < 0.0 {
            return Err(config("tracking.ki", "must be non-negative"));
        }
        match cmd {
            Command::Scurve => {
                let g = self
                    .sweep
                    .tau_g
                    .as_ref()
                    .ok_or_else(|| config("sweep.tau_g", "scurve needs a tau_g grid"))?;
                finite("sweep.tau_g.start_ui", g.start_ui)?;
                finite("sweep.tau_g.stop_ui", g.stop_ui)?;
                if g.points == 0 {
                    return Err(config("sweep.tau_g.points", "grid must be nonempty"));
                }
                if g.points > 1 && g.stop_ui <= g.start_ui {
                    return Err(config("sweep.tau_g.stop_ui", "must exceed start_ui"));
                }
                if self.symbol_count * self.sps < nb {
                    return Err(config("symbol_count", "record shorter than one block"));
                }
            }
            Command::CdSweep => {
                match self.sweep.psp_draws {
                    Some(0) | None => {
                        return Err(config("sweep.psp_draws", "cd-sweep needs psp_draws >= 1"))
                    }
                    _ => {}
                }
                if !(self.symbol_count * self.sps).is_power_of_two() {
                    return Err(config(
                        "symbol_count",
                        "CAF block needs a power-of-two sample count",
                    ));
                }
            }
            Command::DgdSweep => {
                let g = self
                    .sweep
                    .dgd_ps
                    .as_ref()
                    .ok_or_else(|| config("sweep.dgd_ps", "dgd-sweep needs a DGD grid"))?;
                if g.is_empty() {
                    return Err(config("sweep.dgd_ps", "grid must be nonempty"));
                }
                for (i, &v) in g.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(config(
                            format!("sweep.dgd_ps[{i}]"),
                            "DGD must be finite and >= 0",
                        ));
                    }
                }
                if self.sweep.psp_draws == Some(0) {
                    return Err(config("sweep.psp_draws", "must be >= 1"));
                }
            }
            Command::Track | Command::Ber => {
                if self.symbol_count * self.sps < nb {
                    return Err(config("symbol_count", "record shorter than one block"));
                }
                if cmd == Command::Ber {
                    self.validate_ber()?;
                }
            }
            Command::Selftest => {}
        }
        if let Some(g) = &self.sweep.osnr_db {
            if g.is_empty() {
                return Err(config("sweep.osnr_db", "grid must be nonempty"));
            }
            for (i, &v) in g.iter().enumerate() {
                finite(&format!("sweep.osnr_db[{i}]"), v)?;
            }
        }
        Ok(())
    }

    fn validate_channel(&self) -> Result<(), CliError> {
        let ch = &self.channel;
        finite("channel.cd_ns_per_nm", ch.cd_ns_per_nm)?;
        if !(ch.wavelength_nm > 0.0 && ch.wavelength_nm.is_finite()) {
            return Err(config("channel.wavelength_nm", "must be positive"));
        }
        if !(ch.dgd_ps >= 0.0 && ch.dgd_ps.is_finite()) {
            return Err(config("channel.dgd_ps", "must be finite and >= 0"));
        }
        if let Some(p) = ch.psp {
            if StokesVector::new(p[0], p[1], p[2]).is_err() {
                return Err(config("channel.psp", "must be a unit Stokes vector"));
            }
        }
        if let Some(s) = &ch.dgd_sweep {
            if !(s.min_ps >= 0.0 && s.max_ps >= s.min_ps && s.max_ps.is_finite()) {
                return Err(config("channel.dgd_sweep", "need 0 <= min_ps <= max_ps"));
            }
            if !(s.frequency_hz >= 0.0 && s.frequency_hz.is_finite()) {
                return Err(config(
                    "channel.dgd_sweep.frequency_hz",
                    "must be finite and >= 0",
                ));
            }
        }
        finite("channel.sop_rate_rad_s", ch.sop_rate_rad_s)?;
        if ch.sop_block == 0 {
            return Err(config("channel.sop_block", "must be >= 1"));
        }
        if let Some(o) = ch.osnr_db {
            finite("channel.osnr_db", o)?;
        }
        if !(ch.linewidth_hz >= 0.0 && ch.linewidth_hz.is_finite()) {
            return Err(config("channel.linewidth_hz", "must be finite and >= 0"));
        }
        if let Some(j) = &ch.jitter {
            if !(j.amplitude_ui >= 0.0 && j.amplitude_ui.is_finite()) {
                return Err(config(
                    "channel.jitter.amplitude_ui",
                    "must be finite and >= 0",
                ));
            }
            if !(j.frequency_hz >= 0.0 && j.frequency_hz.is_finite()) {
                return Err(config(
                    "channel.jitter.frequency_hz",
                    "must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }

    fn validate_ber(&self) -> Result<(), CliError> {
        if self.runs == 0 {
            return Err(config("runs", "must be >= 1"));
        }
        if self.receivers.is_empty() {
            return Err(config("receivers", "must not be empty"));
        }
        for (i, r) in self.receivers.iter().enumerate() {
            if r.taps == 0 || r.taps % 2 == 0 {
                return Err(config(format!("receivers[{i}].taps"), "must be odd"));
            }
            if r.spacing != "symbol" && r.spacing != "fractional" {
                return Err(config(
                    format!("receivers[{i}].spacing"),
                    "must be `symbol` or `fractional`",
                ));
            }
        }
        if self.sps != 2 {
            return Err(config("sps", "the receiver expects 2 samples per symbol"));
        }
        let rc = ReceiverConfig::new(7, Spacing::Symbol);
        let needed = self.tracking.acquisition_blocks * self.block_len + rc.pilots + rc.discard;
        if self.symbol_count <= needed {
            return Err(config(
                "symbol_count",
                format!("must exceed acquisition + pilots + discard = {needed} symbols"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let s = ScenarioSpec::from_json(r#"{"seed": 3}"#).unwrap();
        assert_eq!(s.baud_rate, 32e9);
        assert_eq!(s.receivers.len(), 2);
        assert!(s.validate(Command::Track).is_ok());
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ScenarioSpec::from_json("{}").is_err());
    }

    #[test]
    fn errors_carry_field_paths() {
        let s = ScenarioSpec::from_json(r#"{"seed": 1, "detectors": ["trace", "nope"]}"#).unwrap();
        match s.validate(Command::Track) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "detectors[1]"),
            other => panic!("{other:?}"),
        }
        let s = ScenarioSpec::from_json(
            r#"{"seed": 1, "sweep": {"tau_g": {"start_ui": 0, "stop_ui": 1, "points": 0}}}"#,
        )
        .unwrap();
        match s.validate(Command::Scurve) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "sweep.tau_g.points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ScenarioSpec::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
    }
}
