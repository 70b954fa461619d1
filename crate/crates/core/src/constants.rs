//! Physical constants. Frequencies are in MHz, fields in tesla.

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON_J_PER_T: f64 = 9.274_010_078_3e-24;

/// μ_B / h in MHz/T.
pub const BOHR_MAGNETON_MHZ_PER_T: f64 = BOHR_MAGNETON_J_PER_T / PLANCK_J_S * 1e-6;

/// ¹H gyromagnetic ratio γ/2π, MHz/T.
pub const GAMMA_H_MHZ_PER_T: f64 = 42.577;

/// ²⁹Si gyromagnetic ratio γ/2π, MHz/T (negative).
pub const GAMMA_SI29_MHZ_PER_T: f64 = -8.465;

/// Ground-state electron g-factor of the T centre.
pub const G_FACTOR_T_CENTER: f64 = 2.005;

/// Natural abundance of ²⁹Si.
pub const SI29_ABUNDANCE: f64 = 0.0467;
