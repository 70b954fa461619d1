use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;

use super::config::RegisterConfig;
use super::hamiltonian::{build_hamiltonian, drive_operator, Channel, SpinOperators};
use super::levels::{diagonalize, LevelLabel, Levels};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Drive elements below this magnitude are treated as forbidden.
pub const MIN_DRIVE_ELEMENT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    /// NMR: the electron label is unchanged.
    ElectronConserving,
    /// ESR with all nuclear labels unchanged.
    ElectronFlipping,
    /// ESR that also flips one or more nuclei.
    NuclearFlipping,
}

impl TransitionKind {
    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::ElectronConserving => "electron_conserving",
            TransitionKind::ElectronFlipping => "electron_flipping_nuclear_conserving",
            TransitionKind::NuclearFlipping => "nuclear_flipping",
        }
    }

    /// Channel that normally drives this kind of transition.
    pub fn channel(self) -> Channel {
        match self {
            TransitionKind::ElectronConserving => Channel::Rf,
            _ => Channel::Mw,
        }
    }

    pub fn classify(a: LevelLabel, b: LevelLabel) -> Self {
        if a.electron_up() == b.electron_up() {
            TransitionKind::ElectronConserving
        } else if a.nuclear_state() == b.nuclear_state() {
            TransitionKind::ElectronFlipping
        } else {
            TransitionKind::NuclearFlipping
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dipole-allowed transition between two levels (`lower` has the lower energy).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub freq_mhz: f64,
    /// `⟨upper|D_c|lower⟩` for each channel, indexed by [`Channel::index`].
    pub drive: [C64; 2],
    pub kind: TransitionKind,
}

impl Transition {
    pub fn element(&self, channel: Channel) -> C64 {
        self.drive[channel.index()]
    }

    pub fn channel(&self) -> Channel {
        self.kind.channel()
    }

    /// Magnitude of the drive element on the channel matching the kind.
    pub fn abs_drive(&self) -> f64 {
        self.element(self.channel()).norm()
    }
}

/// Levels, drive matrices and allowed transitions of a register.
#[derive(Clone, Debug)]
pub struct TransitionCatalog {
    pub config: RegisterConfig,
    pub levels: Levels,
    /// Drive operators in the eigenbasis, indexed by [`Channel::index`].
    pub drive: [CMatrix; 2],
    pub transitions: Vec<Transition>,
    /// `⟨k|S_z^s|k⟩` per level `k` and spin `s`.
    pub spin_z: Vec<Vec<f64>>,
}

/// Diagonalizes the register Hamiltonian and lists every level pair whose
/// drive element on any channel exceeds [`MIN_DRIVE_ELEMENT`].
pub fn transition_catalog(config: &RegisterConfig) -> Result<TransitionCatalog> {
    let h = build_hamiltonian(config)?;
    let levels = diagonalize(&h, config.n_spins())?;
    let v = levels.basis();
    let drive = [drive_operator(config, Channel::Mw).in_basis(&v), drive_operator(config, Channel::Rf).in_basis(&v)];

    let ops = SpinOperators::new(config.n_spins());
    let spin_z = (0..levels.len())
        .map(|k| {
            (0..config.n_spins())
                .map(|s| {
                    let z = ops.z(s);
                    let vec = &levels.levels[k].vector;
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..vec.len() {
                        acc += vec[i].conj() * z[(i, i)] * vec[i];
                    }
                    acc.re
                })
                .collect()
        })
        .collect();

    let mut transitions = Vec::new();
    for lo in 0..levels.len() {
        for hi in (lo + 1)..levels.len() {
            let elements = [drive[0][(hi, lo)], drive[1][(hi, lo)]];
            if elements.iter().all(|d| d.norm() <= MIN_DRIVE_ELEMENT) {
                continue;
            }
            let kind = TransitionKind::classify(levels.levels[lo].label, levels.levels[hi].label);
            transitions.push(Transition {
                lower: lo,
                upper: hi,
                freq_mhz: levels.levels[hi].energy_mhz - levels.levels[lo].energy_mhz,
                drive: elements,
                kind,
            });
        }
    }
    Ok(TransitionCatalog { config: config.clone(), levels, drive, transitions, spin_z })
}

impl TransitionCatalog {
    pub fn from_config(config: &RegisterConfig) -> Result<Self> {
        transition_catalog(config)
    }

    pub fn n_spins(&self) -> usize {
        self.levels.n_spins
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.energies()
    }

    pub fn level(&self, label: LevelLabel) -> Result<usize> {
        self.levels.find(label).ok_or_else(|| Error::UnknownLabel(format!("{label}")))
    }

    pub fn label(&self, index: usize) -> LevelLabel {
        self.levels.levels[index].label
    }

    /// Drive element `⟨to|D_c|from⟩`.
    pub fn element(&self, channel: Channel, from: usize, to: usize) -> C64 {
        self.drive[channel.index()][(to, from)]
    }

    /// The transition joining two labelled levels.
    pub fn between(&self, a: LevelLabel, b: LevelLabel) -> Result<&Transition> {
        let (i, j) = (self.level(a)?, self.level(b)?);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.transitions
            .iter()
            .find(|t| t.lower == lo && t.upper == hi)
            .ok_or_else(|| Error::MissingTransition(format!("{a} ↔ {b}")))
    }

    /// Nuclear-conserving ESR line for the nuclear configuration of `nuclear`
    /// (its electron bit is ignored).
    pub fn esr_line(&self, nuclear: LevelLabel) -> Result<&Transition> {
        self.between(nuclear.with_spin(0, false), nuclear.with_spin(0, true))
    }

    /// NMR line flipping nucleus `nucleus` (0-based among nuclei) from the
    /// configuration `from`.
    pub fn nmr_line(&self, from: LevelLabel, nucleus: usize) -> Result<&Transition> {
        self.between(from, from.flipped(nucleus + 1))
    }

    /// Spin a pulse on `t` addresses: the electron for any ESR line,
    /// otherwise the (first) nucleus whose label changes.
    pub fn addressed_spin(&self, t: &Transition) -> usize {
        let diff = self.label(t.lower).index() ^ self.label(t.upper).index();
        let n = self.n_spins();
        (0..n).find(|&s| diff & (1 << (n - 1 - s)) != 0).unwrap_or(0)
    }

    pub fn count_kind(&self, kind: TransitionKind) -> usize {
        self.transitions.iter().filter(|t| t.kind == kind).count()
    }
}
