//! Std companion to `taba-core`: CIFAR ingestion, model and memory files,
//! run reports, threaded evaluation and the `taba` command-line tool.

pub mod cifar;
pub mod cli;
mod error;
pub mod formats;
pub mod report;
pub mod runtime;
pub mod selftest;

pub use error::{Error, Result};
