//! Config loading, presets, artifact writers and the run/batch drivers
//! behind the `pcosync` binary.

pub mod artifacts;
pub mod config;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_config, parse_pi_expr, ConfigError, RunConfig};
pub use presets::{find_preset, load_preset, PRESETS};
pub use run::{run_batch, run_to_dir, simulate_config, write_batch, BatchReport, RunError, RunSummary};
