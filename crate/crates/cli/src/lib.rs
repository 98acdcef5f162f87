//! Spec files, runs and output formats for `fieldtrial`.

pub mod error;
pub mod exec;
pub mod format;
pub mod output;
pub mod run;
pub mod specfile;

pub use error::{CliError, Result};
