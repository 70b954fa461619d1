//! Register Hamiltonian, energy levels and the catalog of allowed transitions.

mod catalog;
mod config;
mod hamiltonian;
mod levels;
mod spectrum;

pub use catalog::{transition_catalog, Transition, TransitionCatalog, TransitionKind, MIN_DRIVE_ELEMENT};
pub use config::{CouplingMode, HyperfineTensor, Nucleus, RegisterConfig, Species, MAX_HYPERFINE_MHZ};
pub use hamiltonian::{build_hamiltonian, drive_operator, Channel, SpinOperators};
pub use levels::{diagonalize, Level, LevelLabel, Levels};
pub use spectrum::{find_peaks, synthesize_spectrum, Peak};

use crate::constants::BOHR_MAGNETON_MHZ_PER_T;
use crate::error::{Error, Result};

/// Nuclear Zeeman frequency and parallel hyperfine magnitude from the two
/// NMR lines of one nucleus (electron down / electron up), MHz.
///
/// Returns `(zeeman, a_parallel)` with `zeeman = (f_down + f_up) / 2` and
/// `a_parallel = (f_up − f_down) / 2`.
pub fn extract_spin_params(f_down_mhz: f64, f_up_mhz: f64) -> Result<(f64, f64)> {
    if !f_down_mhz.is_finite() || !f_up_mhz.is_finite() {
        return Err(Error::Input("NMR frequencies must be finite".into()));
    }
    Ok(((f_down_mhz + f_up_mhz) / 2.0, (f_up_mhz - f_down_mhz) / 2.0))
}

/// Gyromagnetic ratio (MHz/T) from a Zeeman frequency and the field.
pub fn gyro_from_zeeman(zeeman_mhz: f64, b_field_t: f64) -> Result<f64> {
    if !(b_field_t > 0.0) {
        return Err(Error::Input(alloc::format!("field must be positive, got {b_field_t} T")));
    }
    Ok(zeeman_mhz / b_field_t)
}

/// Field (T) at which an electron with g-factor `g` has ESR frequency `f_ghz`.
pub fn field_from_esr(f_ghz: f64, g: f64) -> Result<f64> {
    if !(f_ghz > 0.0) || !(g > 0.0) || !f_ghz.is_finite() || !g.is_finite() {
        return Err(Error::Input(alloc::format!("need positive frequency and g-factor, got {f_ghz} GHz, g = {g}")));
    }
    Ok(f_ghz * 1e3 / (g * BOHR_MAGNETON_MHZ_PER_T))
}
