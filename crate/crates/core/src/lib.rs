//! Simulation core for an optically addressed spin register made of one
//! electron and two nuclear spins (²⁹Si and ¹H).
//!
//! Units: frequencies in MHz, times in μs, fields in tesla, unless a name
//! says otherwise (`_khz`, `_ms`).
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constants;
pub mod error;
pub mod fitting;
pub mod hyperfine;
pub mod linalg;
pub mod noise;
pub mod presets;
pub mod pulse;
pub mod readout;
pub mod register;
pub mod rng;
pub mod tomography;

pub use error::{Error, FitError, Result};
