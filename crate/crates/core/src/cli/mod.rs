//! Configuration and commands behind the `tasnet` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_ablate, cmd_eval, cmd_select, cmd_synth, cmd_train};
pub use config::{parse_override, Loocv, RunConfig, CONFIG_ENV};
