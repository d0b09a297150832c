//! File formats, experiment orchestration and the `mobnet` command line
//! on top of `mobnet-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod io;
pub mod output;

pub use mobnet_core as core;
