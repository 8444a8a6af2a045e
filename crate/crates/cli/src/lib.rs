//! Config-driven front end for the active-learning simulation harness.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{load_config, parse_config, ConfigFile};
pub use error::{CliError, CliResult};
pub use plot::emit_plot_data;
pub use run::{cmd_run, RunOptions};
