//! Experiment harness for the activity-driven A-SIS toolkit: JSON configs,
//! parameter sweeps, CSV tables with JSON sidecars, SVG plots and
//! figure-reproduction recipes.

pub mod config;
pub mod error;
pub mod figures;
pub mod plot;
pub mod run;
pub mod stats;
pub mod table;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use plot::{emit_plot, PlotKind, PlotSpec};
pub use run::{run, run_with_workers, write_artifacts, Artifacts};
pub use table::{Cell, ResultTable};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ADSIS_OUT_DIR";
