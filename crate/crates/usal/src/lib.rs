//! File formats, experiment runner and reports for `usal-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod libsvm;
pub mod meta;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
