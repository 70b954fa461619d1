//! File formats, configuration and the command-line front end of the
//! spin-register simulator.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod manifest;
pub mod sites;
