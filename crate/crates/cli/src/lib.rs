//! Configuration parsing and orchestration behind the `fsi-fem` binary.

pub mod config;
pub mod execute;

pub use config::{parse_config, parse_config_str, Mode, RunConfig};
pub use execute::{execute, Outcome};
