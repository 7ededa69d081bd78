//! Batch experiments over sequences and evaluation modes.

pub mod commands;
pub mod config;

pub use commands::{cmd_compare, cmd_eval, cmd_report, cmd_run, cmd_synth, load_motion_specs, RunSummary};
pub use config::{ConfigFile, Experiment};
