//! File formats, run configuration, reports and the command-line verbs.
//!
//! Every artifact is written atomically (temp file in the target directory,
//! then rename). JSON and CSV outputs contain no timestamps or host data, so
//! identical config, seed and inputs reproduce them byte for byte.

pub mod cli;
pub mod config;
pub mod geo;
pub mod io;
pub mod report;
pub mod svg;

pub use config::RunConfig;
pub use report::Report;
