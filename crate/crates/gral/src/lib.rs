//! File formats, reports and the `gral` command line on top of `gral-core`.

pub mod cli;
pub mod formats;
pub mod report;
