//! Library side of the `scaleresp` command-line tool.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod curves;
pub mod report;
