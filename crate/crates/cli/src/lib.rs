//! Scenario runner for the `cyclosync` toolkit: JSON scenario specs in, CSV
//! tables out.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod run;
pub mod stats;

pub use config::{Command, ScenarioSpec};
pub use error::CliError;
pub use output::{Cell, Table};
