//! File formats, configuration, parallel drivers and the `cinetrans`
//! command line on top of [`cinetrans_core`].

pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod parallel;
pub mod schema;

pub use error::{CliError, ExitCode};
