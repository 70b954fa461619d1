//! Phase-reversal tomography of two-nucleus Bell states.
//!
//! Matrices use the basis order `|⇓⇓⟩, |⇓⇑⟩, |⇑⇓⟩, |⇑⇑⟩` (²⁹Si first) with
//! populations `p1..p4` and upper-triangle entries
//! `a = ρ₁₂, b = ρ₁₃, c = ρ₁₄, d = ρ₂₃, e = ρ₂₄, f = ρ₃₄`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, FitError, Result};
use crate::fitting::{fit_ramsey_fixed_frequency, linear_least_squares, Covariance};
use crate::pulse::{
    bell_generation, bell_reversal, bell_start_label, run_sequence, BellState, DensityMatrix, Item, Param, RunOptions,
    Sequence,
};
use crate::readout::{
    estimate_populations, expected_cycle_counts, nuclear_expectation, nuclear_populations, simulate_background,
    simulate_readout, PopulationEstimate, ReadoutModel, ReadoutRecord,
};
use crate::register::TransitionCatalog;
use crate::rng::derive_seed;

/// Off-diagonal entry of the two-nucleus density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entry {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Entry {
    pub const ALL: [Entry; 6] = [Entry::A, Entry::B, Entry::C, Entry::D, Entry::E, Entry::F];

    /// Zero-based (row, column) in the tomography basis.
    pub fn position(self) -> (usize, usize) {
        match self {
            Entry::A => (0, 1),
            Entry::B => (0, 2),
            Entry::C => (0, 3),
            Entry::D => (1, 2),
            Entry::E => (1, 3),
            Entry::F => (2, 3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Entry::A => "a",
            Entry::B => "b",
            Entry::C => "c",
            Entry::D => "d",
            Entry::E => "e",
            Entry::F => "f",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Tomography-basis index of a nuclear configuration index (`⇑⇑ = 0`).
pub fn basis_index(config: usize) -> usize {
    3 - config
}

/// Density matrix with measured populations and only the off-diagonal
/// entries that phase reversal can reach; the rest stay unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialDensityMatrix {
    /// `p1..p4` in the tomography basis.
    pub populations: [f64; 4],
    entries: [Option<C64>; 6],
}

impl PartialDensityMatrix {
    /// Validates normalisation (1e−6) and the Cauchy–Schwarz bound on every known entry.
    pub fn new(populations: [f64; 4], known: &[(Entry, C64)]) -> Result<Self> {
        let sum: f64 = populations.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || populations.iter().any(|p| !(*p >= -1e-12)) {
            return Err(Error::Input(format!("populations must be non-negative and sum to 1, sum = {sum}")));
        }
        let mut entries = [None; 6];
        for &(e, z) in known {
            let (i, j) = e.position();
            if z.norm_sqr() > populations[i] * populations[j] + 1e-6 {
                return Err(Error::Input(format!(
                    "|{}|² = {:.6} exceeds p{}·p{} = {:.6}",
                    e.name(),
                    z.norm_sqr(),
                    i + 1,
                    j + 1,
                    populations[i] * populations[j]
                )));
            }
            entries[e.index()] = Some(z);
        }
        Ok(Self { populations, entries })
    }

    /// Full 4×4 matrix with every entry known, in the tomography basis.
    pub fn from_matrix(rho: &[[C64; 4]; 4]) -> Result<Self> {
        let pops = [rho[0][0].re, rho[1][1].re, rho[2][2].re, rho[3][3].re];
        let known: Vec<(Entry, C64)> = Entry::ALL.iter().map(|&e| (e, rho[e.position().0][e.position().1])).collect();
        Self::new(pops, &known)
    }

    pub fn entry(&self, e: Entry) -> Option<C64> {
        self.entries[e.index()]
    }

    pub fn unknown(&self) -> Vec<Entry> {
        Entry::ALL.iter().copied().filter(|e| self.entries[e.index()].is_none()).collect()
    }

    /// `Tr(ρ ρ_ideal)`: `0.5(p1+p4) ∓ Re c` for Φ∓ and `0.5(p2+p3) ± Re d` for Ψ±.
    pub fn fidelity(&self, ideal: BellState) -> Result<f64> {
        let p = &self.populations;
        let (entry, pops, sign) = match ideal {
            BellState::PhiMinus => (Entry::C, p[0] + p[3], -1.0),
            BellState::PhiPlus => (Entry::C, p[0] + p[3], 1.0),
            BellState::PsiPlus => (Entry::D, p[1] + p[2], 1.0),
            BellState::PsiMinus => (Entry::D, p[1] + p[2], -1.0),
        };
        let z = self
            .entry(entry)
            .ok_or_else(|| Error::Input(format!("fidelity to {} needs off-diagonal entry {}", ideal.name(), entry.name())))?;
        Ok(0.5 * pops + sign * z.re)
    }
}

/// Entry of a Bell state's coherence: `c` for Φ, `d` for Ψ.
pub fn coherence_entry(state: BellState) -> Entry {
    if state.is_phi() {
        Entry::C
    } else {
        Entry::D
    }
}

/// Least-squares fit of `⟨σ_z⟩_Si(θ) = offset − 2a cos 4θ + 2b sin 4θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagonalFit {
    pub a: f64,
    pub b: f64,
    pub offset: f64,
    /// Over `[offset, a, b]`.
    pub covariance: Covariance,
    pub rms_residual: f64,
}

/// Extracts `c = a + ib` from a phase sweep with `φ1 = θ`, `φ2 = 3θ`.
/// For Ψ sweeps the same fit returns `d = −(a + ib)`; see [`extract_coherence`].
pub fn extract_offdiagonal(theta: &[f64], sigma_z: &[f64], stderr: Option<&[f64]>) -> Result<OffDiagonalFit, FitError> {
    let m = theta.len();
    if sigma_z.len() != m {
        return Err(FitError::new(format!("{m} phases but {} values", sigma_z.len())));
    }
    if m < 8 {
        return Err(FitError::new(format!("need at least 8 phase points, got {m}")));
    }
    let (lo, hi) = theta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    // A uniform grid of m points spans (m−1)/m of the period π/2 of 4θ.
    if hi - lo < FRAC_PI_2 * (m as f64 - 1.0) / m as f64 - 1e-9 {
        return Err(FitError::new(format!("phase grid spans {:.4} rad, less than one period of 4θ", hi - lo)));
    }
    let design: Vec<f64> = theta.iter().flat_map(|&t| [1.0, -2.0 * (4.0 * t).cos(), 2.0 * (4.0 * t).sin()]).collect();
    let weights: Option<Vec<f64>> = stderr.map(|s| s.iter().map(|e| 1.0 / (e * e).max(1e-300)).collect());
    let sol = linear_least_squares(&design, 3, sigma_z, weights.as_deref())?;
    Ok(OffDiagonalFit {
        offset: sol.params[0],
        a: sol.params[1],
        b: sol.params[2],
        covariance: sol.covariance,
        rms_residual: sol.rms_residual,
    })
}

/// The coherence of `state` with its standard errors `(σ_re, σ_im)`.
pub fn extract_coherence(state: BellState, fit: &OffDiagonalFit) -> (C64, f64, f64) {
    let sign = if state.is_phi() { 1.0 } else { -1.0 };
    (C64::new(sign * fit.a, sign * fit.b), fit.covariance.stderr(1), fit.covariance.stderr(2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub state: BellState,
    pub matrix: PartialDensityMatrix,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub populations_stderr: [f64; 4],
    pub fit: OffDiagonalFit,
}

/// Combines measured populations (tomography basis) with a phase-sweep fit.
pub fn assemble(state: BellState, populations: [f64; 4], populations_stderr: [f64; 4], fit: OffDiagonalFit) -> Result<TomographyResult> {
    let (z, sd_re, _) = extract_coherence(state, &fit);
    let matrix = PartialDensityMatrix::new(populations, &[(coherence_entry(state), z)])?;
    let fidelity = matrix.fidelity(state)?;
    let (i, j) = if state.is_phi() { (0, 3) } else { (1, 2) };
    let fidelity_stderr = (0.25 * (populations_stderr[i].powi(2) + populations_stderr[j].powi(2)) + sd_re * sd_re).sqrt();
    Ok(TomographyResult { state, matrix, fidelity, fidelity_stderr, populations_stderr, fit })
}

/// Gaussian `T2*` of a Bell Ramsey trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellT2 {
    pub t2_star: f64,
    pub stderr: f64,
    /// No decay within the record: `t2_star` is +∞.
    pub no_decay: bool,
}

/// Fits a Gaussian-damped fringe at angular virtual detuning `omega`
/// (rad per unit of `tau`) and returns its 1/e time.
pub fn bell_ramsey_t2(tau: &[f64], sigma_z: &[f64], omega: f64) -> Result<BellT2, FitError> {
    if !(omega > 0.0) {
        return Err(FitError::new(format!("virtual detuning must be positive, got {omega}")));
    }
    let fit = fit_ramsey_fixed_frequency(tau, sigma_z, omega / core::f64::consts::TAU)?;
    Ok(BellT2 { t2_star: fit.t2_star, stderr: fit.t2_star_stderr, no_decay: fit.no_decay })
}

/// Settings of a simulated tomography run.
#[derive(Clone, Debug)]
pub struct TomographyConfig {
    pub state: BellState,
    /// Sweep values of θ (`φ1 = θ`, `φ2 = 3θ`), rad.
    pub thetas: Vec<f64>,
    pub readout: ReadoutModel,
    /// Shots per measurement setting; `None` uses exact expected counts.
    pub shots: Option<usize>,
    pub seed: u64,
    pub options: RunOptions,
    pub rf_rabi_mhz: f64,
    /// Run the Bell generation before measuring; otherwise the initial state is analysed as given.
    pub prepare: bool,
}

impl TomographyConfig {
    /// `n` equally spaced θ over one period of 4θ.
    pub fn uniform_thetas(n: usize) -> Vec<f64> {
        (0..n).map(|k| FRAC_PI_2 * k as f64 / n as f64).collect()
    }
}

/// Output of [`run_tomography`], including the raw sweep.
#[derive(Clone, Debug)]
pub struct TomographyRun {
    pub result: TomographyResult,
    pub populations: PopulationEstimate,
    pub thetas: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub sigma_z_stderr: Vec<f64>,
}

/// Estimates nuclear-configuration populations from simulated photon counts.
pub fn measure_populations(pops: &[f64], readout: &ReadoutModel, shots: Option<usize>, seed: u64) -> Result<PopulationEstimate> {
    let n = readout.n_repetitions;
    match shots {
        None => {
            let mean = |t: usize| -> Result<f64> { Ok(expected_cycle_counts(pops, t, readout)?.iter().sum()) };
            let bg = readout.background_per_cycle * n as f64;
            let mut signal = Vec::with_capacity(pops.len());
            for t in 0..pops.len() {
                signal.push((mean(t)? - bg).max(0.0));
            }
            let total: f64 = signal.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Estimation("expected signal is zero for every configuration".into()));
            }
            Ok(PopulationEstimate {
                populations: signal.iter().map(|s| s / total).collect(),
                stderr: vec![0.0; pops.len()],
                signal,
                clamped: false,
            })
        }
        Some(shots) => {
            let sets: Vec<Vec<ReadoutRecord>> = (0..pops.len())
                .map(|t| simulate_readout(pops, t, readout, shots, derive_seed(seed, t as u64), "setting"))
                .collect::<Result<_>>()?;
            let refs: Vec<&[ReadoutRecord]> = sets.iter().map(Vec::as_slice).collect();
            let bg = simulate_background(readout, shots, derive_seed(seed, u64::MAX))?;
            estimate_populations(&refs, &bg, n)
        }
    }
}

fn to_basis(config_values: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, v) in config_values.iter().enumerate().take(4) {
        out[basis_index(k)] = *v;
    }
    out
}

/// Simulates the whole protocol: population measurement, phase-reversal
/// sweep, readout of every θ point and the fit.
pub fn run_tomography(catalog: &TransitionCatalog, initial: &DensityMatrix, cfg: &TomographyConfig) -> Result<TomographyRun> {
    if catalog.n_spins() != 3 {
        return Err(Error::Input("tomography needs exactly two nuclei".into()));
    }
    cfg.readout.validate()?;
    let prep = if cfg.prepare { bell_generation(catalog, cfg.state, cfg.rf_rabi_mhz)? } else { Vec::new() };

    let mut gen_items = prep.clone();
    gen_items.push(Item::Read);
    let prepared = run_sequence(initial, &Sequence::new(gen_items), catalog, &cfg.options)?;
    let prepared_state = &prepared[0].state;
    let populations = measure_populations(&nuclear_populations(catalog, prepared_state), &cfg.readout, cfg.shots, derive_seed(cfg.seed, 0))?;

    let mut items = prep;
    items.extend(bell_reversal(catalog, cfg.state, Param::sweep(), Param::affine(0.0, 3.0), cfg.rf_rabi_mhz)?);
    items.push(Item::Read);
    let sweep = Sequence::new(items).with_sweep("theta", cfg.thetas.clone());
    let points = run_sequence(initial, &sweep, catalog, &cfg.options)?;

    let mut sigma_z = Vec::with_capacity(points.len());
    let mut sigma_z_stderr = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let est = measure_populations(&nuclear_populations(catalog, &p.state), &cfg.readout, cfg.shots, derive_seed(cfg.seed, 1 + i as u64))?;
        sigma_z.push(nuclear_expectation(&est.populations, 0)?);
        sigma_z_stderr.push(est.stderr.iter().map(|s| s * s).sum::<f64>().sqrt());
    }
    let fit = extract_offdiagonal(&cfg.thetas, &sigma_z, None)?;
    let result = assemble(cfg.state, to_basis(&populations.populations), to_basis(&populations.stderr), fit)?;
    Ok(TomographyRun { result, populations, thetas: cfg.thetas.clone(), sigma_z, sigma_z_stderr })
}

/// Register state with the electron down and the given nuclear-configuration populations.
pub fn electron_down_state(catalog: &TransitionCatalog, nuclear: &[f64]) -> Result<DensityMatrix> {
    let start = bell_start_label(catalog);
    let mut pops = vec![0.0; catalog.dim()];
    for (config, &p) in nuclear.iter().enumerate() {
        let label = crate::register::LevelLabel::new(catalog.n_spins(), config).with_spin(0, start.electron_up());
        pops[catalog.level(label)?] = p;
    }
    DensityMatrix::from_populations(&pops)
}
