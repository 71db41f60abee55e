//! Pipeline orchestration for the solution-existence certificate: config
//! parsing with exact decimal numerals, stage execution with on-disk
//! caching, and emission of the machine-readable certificate plus the
//! human-readable report.

pub mod config;
pub mod pipeline;
pub mod report;
