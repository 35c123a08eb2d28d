//! Closed-loop timing recovery and a minimal receiver chain.

pub mod interp;
pub mod receiver;
pub mod tracking;

pub use interp::{farrow_weights, fractional_delay, interpolate_at, shift_samples};
pub use receiver::{receive, receive_reference, ReceiverConfig, ReceiverReport, Spacing};
pub use tracking::{track, track_and_retime, LoopConfig, TrackPoint, TrackRecord};
