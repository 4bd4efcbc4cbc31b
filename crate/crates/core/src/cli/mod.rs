//! Configuration files, surface export and the `rfis` command line.

pub mod config;
pub mod export;
pub mod run;

pub use config::{parse_config, ConfigDocument, ConfigError, RfisConfig};
pub use export::{export_surface, ExportFormat};
pub use run::{run_subcommand, RunOutput, EXIT_INVALID, EXIT_OK, EXIT_USAGE};
