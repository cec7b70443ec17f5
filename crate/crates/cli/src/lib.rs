//! Configuration, orchestration and serialization behind the `heston-lda`
//! binary.

pub mod config;
pub mod csv;
pub mod output;
pub mod run;

/// Crate version with the `git describe` output of the build, when available.
pub const VERSION: &str = env!("HESTON_LDA_VERSION");

pub use config::{parse_config, ConfigErrors, Experiment, ExperimentConfig};
pub use output::write_outputs;
pub use run::{run_experiment, OutputFile};
