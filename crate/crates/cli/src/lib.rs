//! Command line front end for the `polyedge` library.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{Emit, GridSpec, Preset, RawConfig, RunConfig, Thresholds};
pub use error::{CliError, Result};
pub use pipeline::{cmd_run, cmd_sweep, run_pipeline, Method, RunReport, SweepReport};
