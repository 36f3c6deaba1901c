//! File formats, configuration and the `bdns` command line on top of
//! [`bdns_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod identities;
pub mod ledger_io;
pub mod study;

pub use error::{CliError, Result};
