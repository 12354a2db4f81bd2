//! File formats, a thread-pool executor and the command-line front end for
//! `perfpipe-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;

pub use error::{CliError, Result};
pub use perfpipe_core as core;
