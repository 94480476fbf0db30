//! File formats, checkpoints, reports and the `vrin` command-line driver
//! around [`vrin_core`].

pub mod checkpoint;
pub mod cli;
pub mod config_file;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, CliResult};
