//! Command-line front end: configuration loading, the arithmetic expression
//! grammar, verification suites and versioned JSON/CSV reports.

pub mod app;
pub mod config;
pub mod error;
pub mod expr;
pub mod report;
pub mod suites;

pub use error::{CliError, CliResult};
