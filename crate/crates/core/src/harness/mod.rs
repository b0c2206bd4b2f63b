//! Configuration, presets, file formats and the drivers behind the CLI.

pub mod config;
pub mod mms;
pub mod output;
pub mod presets;
pub mod run;
pub mod verify;

pub use config::{parse_config, parse_config_with, Preset, SimConfig, TimeStep};
pub use output::{read_diagnostics, read_snapshot, Snapshot};
pub use presets::{build_initial_state, InitialData};
pub use run::{run_simulation, simulate, RunObserver, RunSummary, Silent};
