use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::constants::{GAMMA_H_MHZ_PER_T, GAMMA_SI29_MHZ_PER_T};
use crate::error::{Error, Result};

/// Largest hyperfine tensor entry accepted, MHz.
pub const MAX_HYPERFINE_MHZ: f64 = 200.0;

/// Nuclear species of a register spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Species {
    Hydrogen,
    Silicon29,
}

impl Species {
    pub fn gyro_mhz_per_t(self) -> f64 {
        match self {
            Species::Hydrogen => GAMMA_H_MHZ_PER_T,
            Species::Silicon29 => GAMMA_SI29_MHZ_PER_T,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Species::Hydrogen => "H",
            Species::Silicon29 => "Si29",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "H" | "1H" | "H1" | "hydrogen" => Some(Species::Hydrogen),
            "Si" | "Si29" | "29Si" | "silicon29" => Some(Species::Silicon29),
            _ => None,
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Electron-nuclear hyperfine tensor in MHz. Row index is the electron
/// axis, column index the nuclear axis, both ordered x, y, z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperfineTensor(pub [[f64; 3]; 3]);

impl HyperfineTensor {
    /// Symmetric tensor with only the z-row/z-column populated.
    pub fn axial(a_zz: f64, a_xz: f64, a_yz: f64) -> Self {
        Self([[0.0, 0.0, a_xz], [0.0, 0.0, a_yz], [a_xz, a_yz, a_zz]])
    }

    /// Isotropic (contact) tensor `a·1`.
    pub fn isotropic(a: f64) -> Self {
        Self([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    pub fn zz(&self) -> f64 {
        self.0[2][2]
    }

    pub fn xz(&self) -> f64 {
        self.0[2][0]
    }

    pub fn yz(&self) -> f64 {
        self.0[2][1]
    }
}

/// Which hyperfine terms enter the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// Only terms proportional to the electron `S_z`.
    #[default]
    Secular,
    /// The full `S·A·I` coupling.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nucleus {
    pub species: Species,
    pub gyro_mhz_per_t: f64,
    pub hyperfine: HyperfineTensor,
}

impl Nucleus {
    pub fn new(species: Species, hyperfine: HyperfineTensor) -> Self {
        Self { species, gyro_mhz_per_t: species.gyro_mhz_per_t(), hyperfine }
    }
}

/// Static description of the register: field, electron g-factor and the
/// nuclei in basis order (the electron is always spin 0).
#[derive(Clone, Debug, PartialEq)]
pub struct RegisterConfig {
    pub b_field_t: f64,
    pub g_electron: f64,
    pub nuclei: Vec<Nucleus>,
    /// Ising coupling `J I_z I_z` between the first two nuclei, kHz.
    pub j_coupling_khz: f64,
    pub mode: CouplingMode,
}

impl RegisterConfig {
    pub fn n_spins(&self) -> usize {
        self.nuclei.len() + 1
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b_field_t.is_finite() || self.b_field_t < 0.0 {
            return Err(Error::Config(format!("field must be finite and non-negative, got {} T", self.b_field_t)));
        }
        if !self.g_electron.is_finite() {
            return Err(Error::Config(format!("g-factor must be finite, got {}", self.g_electron)));
        }
        if self.nuclei.len() > 6 {
            return Err(Error::Config(format!("at most 6 nuclei supported, got {}", self.nuclei.len())));
        }
        for (k, n) in self.nuclei.iter().enumerate() {
            if !n.gyro_mhz_per_t.is_finite() {
                return Err(Error::Config(format!("nucleus {k}: gyromagnetic ratio must be finite")));
            }
            for (i, row) in n.hyperfine.0.iter().enumerate() {
                for (j, &a) in row.iter().enumerate() {
                    if !a.is_finite() || a.abs() > MAX_HYPERFINE_MHZ {
                        return Err(Error::Config(format!(
                            "nucleus {k}: hyperfine entry ({i},{j}) = {a} MHz outside ±{MAX_HYPERFINE_MHZ} MHz"
                        )));
                    }
                }
            }
        }
        if !self.j_coupling_khz.is_finite() {
            return Err(Error::Config(format!("J coupling must be finite, got {}", self.j_coupling_khz)));
        }
        if self.j_coupling_khz != 0.0 && self.nuclei.len() < 2 {
            return Err(Error::Config("J coupling needs at least two nuclei".into()));
        }
        Ok(())
    }
}
