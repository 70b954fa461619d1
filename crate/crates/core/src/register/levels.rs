use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};

/// Computational-basis label of a register level.
///
/// Bit `s` (counted from the most significant of `n_spins` bits) is 0 for
/// spin up and 1 for spin down. Spin 0 is the electron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelLabel {
    n_spins: u8,
    state: u16,
}

impl LevelLabel {
    pub fn new(n_spins: usize, state: usize) -> Self {
        assert!((1..=16).contains(&n_spins) && state < (1 << n_spins), "label out of range");
        Self { n_spins: n_spins as u8, state: state as u16 }
    }

    /// Builds a label from per-spin orientations (`true` = up), electron first.
    pub fn from_spins(up: &[bool]) -> Self {
        let state = up.iter().fold(0usize, |acc, &u| (acc << 1) | usize::from(!u));
        Self::new(up.len(), state)
    }

    pub fn n_spins(self) -> usize {
        self.n_spins as usize
    }

    /// Index of the basis state in the product space.
    pub fn index(self) -> usize {
        self.state as usize
    }

    fn bit(self, spin: usize) -> usize {
        self.n_spins() - 1 - spin
    }

    pub fn is_up(self, spin: usize) -> bool {
        (self.state >> self.bit(spin)) & 1 == 0
    }

    pub fn electron_up(self) -> bool {
        self.is_up(0)
    }

    /// Nuclear part of the label with the electron bit cleared.
    pub fn nuclear_state(self) -> usize {
        self.index() & ((1 << (self.n_spins() - 1)) - 1)
    }

    pub fn flipped(self, spin: usize) -> Self {
        Self { n_spins: self.n_spins, state: self.state ^ (1 << self.bit(spin)) }
    }

    pub fn with_spin(self, spin: usize, up: bool) -> Self {
        if self.is_up(spin) == up {
            self
        } else {
            self.flipped(spin)
        }
    }

    /// Parses `↓⇑⇓`, or the ASCII form `dUD` (lower case for the electron,
    /// upper case for nuclei). Surrounding `|`/`⟩`/`>` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let body = text.trim().trim_start_matches('|').trim_end_matches('⟩').trim_end_matches('>');
        let mut up = Vec::new();
        for (i, ch) in body.chars().enumerate() {
            let u = match (i, ch) {
                (0, '↑' | 'u') => true,
                (0, '↓' | 'd') => false,
                (i, '⇑' | 'U') if i > 0 => true,
                (i, '⇓' | 'D') if i > 0 => false,
                _ => return Err(Error::UnknownLabel(text.into())),
            };
            up.push(u);
        }
        if up.is_empty() || up.len() > 16 {
            return Err(Error::UnknownLabel(text.into()));
        }
        Ok(Self::from_spins(&up))
    }

    /// ASCII rendering, e.g. `dUD`.
    pub fn ascii(self) -> String {
        (0..self.n_spins())
            .map(|s| match (s, self.is_up(s)) {
                (0, true) => 'u',
                (0, false) => 'd',
                (_, true) => 'U',
                (_, false) => 'D',
            })
            .collect()
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.n_spins() {
            let c = match (s, self.is_up(s)) {
                (0, true) => '↑',
                (0, false) => '↓',
                (_, true) => '⇑',
                (_, false) => '⇓',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// One eigenstate of the static Hamiltonian.
#[derive(Clone, Debug)]
pub struct Level {
    pub energy_mhz: f64,
    /// Dominant basis state.
    pub label: LevelLabel,
    /// True when no basis state carries more than half the weight.
    pub mixed: bool,
    /// Components in the product basis; the dominant one is real positive.
    pub vector: Vec<C64>,
}

impl Level {
    pub fn display_label(&self) -> String {
        if self.mixed {
            "mixed".into()
        } else {
            alloc::format!("{}", self.label)
        }
    }
}

/// Energy levels sorted by energy, ties broken by label.
#[derive(Clone, Debug)]
pub struct Levels {
    pub levels: Vec<Level>,
    pub n_spins: usize,
}

impl Levels {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy_mhz).collect()
    }

    /// Eigenvectors as the columns of a unitary.
    pub fn basis(&self) -> CMatrix {
        let n = self.levels.len();
        let mut v = CMatrix::zeros(n);
        for (j, level) in self.levels.iter().enumerate() {
            for (i, &c) in level.vector.iter().enumerate() {
                v[(i, j)] = c;
            }
        }
        v
    }

    pub fn find(&self, label: LevelLabel) -> Option<usize> {
        self.levels.iter().position(|l| !l.mixed && l.label == label)
    }
}

/// Diagonalizes a Hermitian register Hamiltonian.
pub fn diagonalize(h: &CMatrix, n_spins: usize) -> Result<Levels> {
    if h.dim() != 1 << n_spins {
        return Err(Error::Config(alloc::format!("operator dimension {} does not match {n_spins} spins", h.dim())));
    }
    let eig = hermitian_eigen(h);
    let n = h.dim();
    let mut levels: Vec<Level> = (0..n)
        .map(|j| {
            let mut vector = eig.vectors.column(j);
            let (dominant, weight) = vector
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.norm_sqr()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let phase = vector[dominant].conj() / vector[dominant].norm();
            vector.iter_mut().for_each(|c| *c *= phase);
            vector[dominant] = C64::new(vector[dominant].re, 0.0);
            Level {
                energy_mhz: eig.values[j],
                label: LevelLabel::new(n_spins, dominant),
                mixed: weight <= 0.5,
                vector,
            }
        })
        .collect();

    let scale = levels.iter().map(|l| l.energy_mhz.abs()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut start = 0;
    while start < levels.len() {
        let mut end = start + 1;
        while end < levels.len() && levels[end].energy_mhz - levels[end - 1].energy_mhz <= tol {
            end += 1;
        }
        levels[start..end].sort_by(|a, b| a.display_label().cmp(&b.display_label()).then(a.label.cmp(&b.label)));
        start = end;
    }
    Ok(Levels { levels, n_spins })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_roundtrip() {
        let l = LevelLabel::parse("↓⇑⇓").unwrap();
        assert!(!l.electron_up() && l.is_up(1) && !l.is_up(2));
        assert_eq!(alloc::format!("{l}"), "↓⇑⇓");
        assert_eq!(LevelLabel::parse(&l.ascii()).unwrap(), l);
        assert_eq!(LevelLabel::parse("|dUD⟩").unwrap(), l);
        assert!(LevelLabel::parse("⇑↓").is_err());
        assert_eq!(l.flipped(0).flipped(0), l);
        assert_eq!(l.nuclear_state(), l.flipped(0).nuclear_state());
    }

    #[test]
    fn degenerate_levels_sorted_by_label() {
        let levels = diagonalize(&CMatrix::zeros(4), 2).unwrap();
        let labels: Vec<String> = levels.levels.iter().map(|l| l.display_label()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(labels, sorted);
    }
}
