//! Command-line front end, file formats and the parallel replicate harness
//! for `cmj-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod descriptor;
pub mod error;
pub mod harness;
pub mod output;

pub use cmj_core;
