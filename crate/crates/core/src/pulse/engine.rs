use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64 as C64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::propagator::{pulse_propagator, PropagatorWarnings, RwaCutoff};
use super::sequence::{LaserLine, Sequence, Step};
use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::noise::{DetuningStep, Realization};
use crate::register::TransitionCatalog;

/// Optical pumping applied by `Laser` items.
#[derive(Clone, Debug, PartialEq)]
pub struct OpticalPumping {
    /// Probability per optical cycle that each nucleus flips.
    pub nuclear_flip_per_cycle: Vec<f64>,
    /// Duration of one optical cycle, μs.
    pub cycle_us: f64,
}

impl OpticalPumping {
    /// Electron fully pumped, nuclei untouched.
    pub fn ideal(n_nuclei: usize) -> Self {
        Self { nuclear_flip_per_cycle: vec![0.0; n_nuclei], cycle_us: 1.0 }
    }
}

/// Knobs of [`run_sequence`] beyond the sequence itself.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub cutoff: RwaCutoff,
    /// Per-spin pulse fidelity `f`: a pulse addressing spin `s` acts as
    /// `ρ → f UρU† + (1 − f) ρ`. Missing entries mean 1.
    pub pulse_fidelity: Vec<f64>,
    pub pumping: OpticalPumping,
    /// Deterministic detuning steps added to every noise realization.
    pub detuning_steps: Vec<DetuningStep>,
}

impl RunOptions {
    pub fn new(n_nuclei: usize) -> Self {
        Self {
            cutoff: RwaCutoff::default(),
            pulse_fidelity: Vec::new(),
            pumping: OpticalPumping::ideal(n_nuclei),
            detuning_steps: Vec::new(),
        }
    }

    pub fn for_catalog(catalog: &TransitionCatalog) -> Self {
        Self::new(catalog.n_spins() - 1)
    }

    pub fn ideal_gates(mut self) -> Self {
        self.cutoff = RwaCutoff::IDEAL;
        self
    }

    fn fidelity(&self, spin: usize) -> f64 {
        self.pulse_fidelity.get(spin).copied().unwrap_or(1.0)
    }
}

/// State after one sweep point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub sweep_value: f64,
    pub state: DensityMatrix,
    /// Level populations captured at each `Read` item.
    pub reads: Vec<Vec<f64>>,
    pub warnings: PropagatorWarnings,
}

/// Applies resolved steps to `state` under one noise realization.
pub fn run_steps(
    initial: &DensityMatrix,
    steps: &[Step],
    catalog: &TransitionCatalog,
    options: &RunOptions,
    noise: &Realization,
) -> Result<PointResult> {
    let n = catalog.dim();
    if initial.dim() != n {
        return Err(Error::Input(format!("state dimension {} does not match register dimension {n}", initial.dim())));
    }
    let n_spins = catalog.n_spins();
    let quiet = noise.is_quiet() && options.detuning_steps.is_empty();
    let stepped;
    let noise = if options.detuning_steps.is_empty() {
        noise
    } else {
        stepped = noise.clone().with_steps(&options.detuning_steps);
        &stepped
    };
    let mut rho = initial.clone();
    let mut reads = Vec::new();
    let mut warnings = PropagatorWarnings::default();
    let mut t = 0.0;
    let mut offsets = vec![0.0; n];

    for step in steps {
        let dt = step.duration_us();
        match step {
            Step::Pulse(p) => {
                if !quiet {
                    let means: Vec<f64> = (0..n_spins).map(|s| noise.mean(s, t, t + dt)).collect();
                    level_shifts(catalog, &means, &mut offsets);
                }
                let prop = pulse_propagator(catalog, p, t, &offsets, options.cutoff);
                warnings.no_resonant_transition |= prop.warnings.no_resonant_transition;
                warnings.frame_conflict |= prop.warnings.frame_conflict;
                let f = prop.target.map_or(1.0, |idx| options.fidelity(catalog.addressed_spin(&catalog.transitions[idx])));
                let rotated = prop.unitary.conjugate(&rho.0);
                rho.0 = if f < 1.0 { &rotated.scale(C64::new(f, 0.0)) + &rho.0.scale(C64::new(1.0 - f, 0.0)) } else { rotated };
            }
            Step::Delay { .. } => {
                if !quiet && dt > 0.0 {
                    let phases: Vec<f64> = (0..n_spins).map(|s| noise.integral(s, t, t + dt)).collect();
                    level_shifts(catalog, &phases, &mut offsets);
                    apply_phases(&mut rho.0, &offsets);
                }
                for spin in 0..n_spins {
                    if let Some(t1) = noise.t1_us(spin) {
                        let p = 0.5 * (1.0 - (-dt / t1).exp());
                        apply_bit_flip(&mut rho.0, catalog, spin, p);
                    }
                }
            }
            Step::Laser { line, duration_us } => {
                let cycles = ((duration_us / options.pumping.cycle_us).round() as u32).max(1);
                apply_pumping(&mut rho.0, catalog, *line, cycles, &options.pumping.nuclear_flip_per_cycle);
            }
            Step::Read => reads.push(rho.populations()),
        }
        t += dt;
    }
    Ok(PointResult { sweep_value: f64::NAN, state: rho, reads, warnings })
}

/// Runs every sweep point of `sequence` without stochastic noise.
pub fn run_sequence(
    initial: &DensityMatrix,
    sequence: &Sequence,
    catalog: &TransitionCatalog,
    options: &RunOptions,
) -> Result<Vec<PointResult>> {
    run_sequence_with(initial, sequence, catalog, options, |_| Ok(Realization::quiet(catalog.n_spins())))
}

/// Runs every sweep point, drawing the noise history of point `i` from `realize(i)`.
pub fn run_sequence_with<F>(
    initial: &DensityMatrix,
    sequence: &Sequence,
    catalog: &TransitionCatalog,
    options: &RunOptions,
    mut realize: F,
) -> Result<Vec<PointResult>>
where
    F: FnMut(usize) -> Result<Realization>,
{
    sequence.validate()?;
    sequence
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let steps = sequence.resolve(s);
            let mut r = run_steps(initial, &steps, catalog, options, &realize(i)?)?;
            r.sweep_value = s;
            Ok(r)
        })
        .collect()
}

/// Per-level energy shift `Σ_s x_s ⟨k|S_z^s|k⟩`.
fn level_shifts(catalog: &TransitionCatalog, per_spin: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = catalog.spin_z[k].iter().zip(per_spin).map(|(z, x)| z * x).sum();
    }
}

/// `ρ_ij ← ρ_ij · exp(−i 2π (Φ_i − Φ_j))` for accumulated phases Φ in cycles.
fn apply_phases(rho: &mut CMatrix, phases: &[f64]) {
    let n = rho.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rho[(i, j)] *= C64::from_polar(1.0, -TAU * (phases[i] - phases[j]));
            }
        }
    }
}

/// Level permutation flipping one spin's label; unmatched levels map to themselves.
fn flip_map(catalog: &TransitionCatalog, spin: usize) -> Vec<usize> {
    (0..catalog.dim())
        .map(|k| catalog.level(catalog.label(k).flipped(spin)).unwrap_or(k))
        .collect()
}

fn apply_bit_flip(rho: &mut CMatrix, catalog: &TransitionCatalog, spin: usize, p: f64) {
    if p <= 0.0 {
        return;
    }
    let perm = flip_map(catalog, spin);
    let n = rho.dim();
    let old = rho.clone();
    for i in 0..n {
        for j in 0..n {
            rho[(i, j)] = old[(i, j)] * (1.0 - p) + old[(perm[i], perm[j])] * p;
        }
    }
}

/// Optical pumping as a Kraus map in the level basis. Levels in the
/// excited electron manifold are emptied into the other manifold, each
/// nucleus flipping with probability `1 − (1 − p)^cycles`. Coherences among
/// non-excited levels are kept.
pub fn apply_pumping(rho: &mut CMatrix, catalog: &TransitionCatalog, line: LaserLine, cycles: u32, flip_per_cycle: &[f64]) {
    let n = rho.dim();
    let n_spins = catalog.n_spins();
    let q: Vec<f64> = (0..n_spins - 1)
        .map(|k| 1.0 - (1.0 - flip_per_cycle.get(k).copied().unwrap_or(0.0)).powi(cycles as i32))
        .collect();
    let excited: Vec<bool> = (0..n).map(|k| catalog.label(k).electron_up() == line.excites_up()).collect();
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if !excited[i] && !excited[j] {
                out[(i, j)] = rho[(i, j)];
            }
        }
    }
    for k in (0..n).filter(|&k| excited[k]) {
        let pop = rho[(k, k)].re;
        if pop == 0.0 {
            continue;
        }
        let base = catalog.label(k).with_spin(0, !line.excites_up());
        for mask in 0..(1usize << q.len()) {
            let mut w = 1.0;
            let mut label = base;
            for (nuc, &qn) in q.iter().enumerate() {
                if mask & (1 << nuc) != 0 {
                    w *= qn;
                    label = label.flipped(nuc + 1);
                } else {
                    w *= 1.0 - qn;
                }
            }
            if w == 0.0 {
                continue;
            }
            let dest = catalog.level(label).unwrap_or(k);
            out[(dest, dest)] += C64::new(w * pop, 0.0);
        }
    }
    *rho = out;
}
