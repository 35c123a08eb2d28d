//! Cyclostationarity-based timing recovery and channel estimation for
//! dual-polarization coherent optical receivers.
//!
//! The numeric core is generic over the sample scalar (`f32` or `f64`); the
//! aliases at the crate root fix the common `f64` and `f32` instantiations.

pub mod channel;
pub mod cyclostats;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod jones;
pub mod oracle;
pub mod scalar;
pub mod seed;
pub mod sync;
pub mod ted;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Mat2f64 = jones::Mat2<f64>;
pub type Mat2f32 = jones::Mat2<f32>;
pub type JonesUnitary64 = jones::JonesUnitary<f64>;
pub type JonesUnitary32 = jones::JonesUnitary<f32>;
pub type StokesVector64 = jones::StokesVector<f64>;
pub type StokesVector32 = jones::StokesVector<f32>;
pub type Constellation64 = waveform::Constellation<f64>;
pub type Constellation32 = waveform::Constellation<f32>;
pub type DualPolWaveform64 = waveform::DualPolWaveform<f64>;
pub type DualPolWaveform32 = waveform::DualPolWaveform<f32>;
pub type CyclicMatrixEstimate64 = cyclostats::CyclicMatrixEstimate<f64>;
pub type CyclicMatrixEstimate32 = cyclostats::CyclicMatrixEstimate<f32>;
pub type CafMatrix64 = cyclostats::CafMatrix<f64>;
pub type CafMatrix32 = cyclostats::CafMatrix<f32>;
pub type LoopConfig = sync::LoopConfig;
pub type TrackRecord = sync::TrackRecord;
pub type ReceiverConfig = sync::ReceiverConfig;
