use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::register::{LevelLabel, TransitionCatalog};

/// Register density matrix in the level basis (interaction picture of the
/// static Hamiltonian).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub CMatrix);

impl DensityMatrix {
    /// Pure level `label`.
    pub fn pure(catalog: &TransitionCatalog, label: LevelLabel) -> Result<Self> {
        let k = catalog.level(label)?;
        let mut pops = alloc::vec![0.0; catalog.dim()];
        pops[k] = 1.0;
        Self::from_populations(&pops)
    }

    /// Diagonal state with the given level populations (must sum to 1).
    pub fn from_populations(pops: &[f64]) -> Result<Self> {
        let sum: f64 = pops.iter().sum();
        if pops.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("populations must be non-negative and sum to 1, sum = {sum}")));
        }
        Ok(Self(CMatrix::from_real_diag(pops)))
    }

    /// `|ψ⟩⟨ψ|` for a level-basis amplitude vector.
    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("state vector norm² = {norm}, expected 1")));
        }
        let n = amps.len();
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = amps[i] * amps[j].conj();
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.0[(i, j)].norm_sqr();
            }
        }
        acc
    }

    /// Population of a labelled level.
    pub fn population(&self, catalog: &TransitionCatalog, label: LevelLabel) -> Result<f64> {
        Ok(self.0[(catalog.level(label)?, catalog.level(label)?)].re)
    }

    /// Total population with the electron up.
    pub fn electron_up(&self, catalog: &TransitionCatalog) -> f64 {
        (0..self.dim()).filter(|&k| catalog.label(k).electron_up()).map(|k| self.0[(k, k)].re).sum()
    }

    pub fn evolve(&mut self, u: &CMatrix) {
        self.0 = u.conjugate(&self.0);
    }

    /// Smallest eigenvalue; negative values flag a non-physical state.
    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::hermitian_eigen(&self.0).values.first().copied().unwrap_or(0.0)
    }
}
