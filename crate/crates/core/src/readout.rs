//! Repetitive optical readout of the nuclear register and population estimation.
//!
//! Nuclear configurations are indexed by the nuclear bits of a level label:
//! for two nuclei the order is `⇑⇑, ⇑⇓, ⇓⇑, ⇓⇓` (²⁹Si first).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::pulse::DensityMatrix;
use crate::register::TransitionCatalog;
use crate::rng::{compensated_sum, derive_seed, rng_from_seed};

/// Optical readout parameters. Each readout cycle applies a conditional
/// electron flip on the target nuclear configuration followed by a laser pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutModel {
    /// Mean detected photons per cycle while the electron cycles for the whole pulse.
    pub photons_per_cycle: f64,
    /// Probability that the bright electron leaves the cycling transition during one pulse.
    pub p_e_flip_per_cycle: f64,
    /// Probability per nuclear spin and bright cycle of a nuclear flip.
    pub p_n_flip_per_cycle: f64,
    /// Mean background photons per cycle.
    pub background_per_cycle: f64,
    /// Readout cycles per shot.
    pub n_repetitions: usize,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        crate::presets::readout()
    }
}

impl ReadoutModel {
    /// Noise-free unit-efficiency readout.
    pub fn ideal() -> Self {
        Self {
            photons_per_cycle: 1.0,
            p_e_flip_per_cycle: 0.0,
            p_n_flip_per_cycle: 0.0,
            background_per_cycle: 0.0,
            n_repetitions: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("p_e_flip_per_cycle", self.p_e_flip_per_cycle)?;
        prob("p_n_flip_per_cycle", self.p_n_flip_per_cycle)?;
        for (name, v) in [("photons_per_cycle", self.photons_per_cycle), ("background_per_cycle", self.background_per_cycle)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Input(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.n_repetitions == 0 {
            return Err(Error::Input("n_repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// Mean signal photons of one bright cycle: a flip during the pulse
    /// truncates emission at a uniformly distributed time.
    pub fn bright_mean(&self) -> f64 {
        self.photons_per_cycle * (1.0 - self.p_e_flip_per_cycle / 2.0)
    }

    /// Probability that the nuclear configuration survives one bright cycle.
    pub fn nuclear_survival(&self, n_nuclei: usize) -> f64 {
        (1.0 - self.p_n_flip_per_cycle).powi(n_nuclei as i32)
    }
}

/// Photon counts of one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadoutRecord {
    pub shot: usize,
    /// Counts per readout cycle.
    pub counts: Vec<u32>,
    /// Label of the prepared state or measurement setting.
    pub state: String,
}

impl ReadoutRecord {
    /// Total counts in the first `n` cycles.
    pub fn window(&self, n: usize) -> u32 {
        self.counts.iter().take(n).sum()
    }
}

/// Nuclear configuration populations of a register state (electron traced out).
pub fn nuclear_populations(catalog: &TransitionCatalog, state: &DensityMatrix) -> Vec<f64> {
    let n_nuc = catalog.n_spins() - 1;
    let mut pops = vec![0.0; 1 << n_nuc];
    for (k, p) in state.populations().into_iter().enumerate() {
        pops[catalog.label(k).nuclear_state()] += p;
    }
    pops
}

fn check_populations(pops: &[f64], target: usize) -> Result<usize> {
    if pops.is_empty() || !pops.len().is_power_of_two() {
        return Err(Error::Input(format!("need 2^n nuclear populations, got {}", pops.len())));
    }
    if target >= pops.len() {
        return Err(Error::Input(format!("target configuration {target} out of range")));
    }
    let sum: f64 = pops.iter().sum();
    if pops.iter().any(|p| !(*p >= -1e-12)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Input(format!("populations must be non-negative and sum to 1, sum = {sum}")));
    }
    Ok(pops.len().trailing_zeros() as usize)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u32).unwrap_or(0)
}

fn sample_index<R: Rng + ?Sized>(pops: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in pops.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return i;
        }
    }
    pops.len() - 1
}

fn one_shot<R: Rng + ?Sized>(pops: &[f64], target: Option<usize>, n_nuclei: usize, model: &ReadoutModel, rng: &mut R) -> Vec<u32> {
    let mut config = sample_index(pops, rng);
    let survival = model.nuclear_survival(n_nuclei);
    (0..model.n_repetitions)
        .map(|_| {
            let mut signal_mean = 0.0;
            if Some(config) == target {
                let fraction = if rng.random::<f64>() < model.p_e_flip_per_cycle { rng.random::<f64>() } else { 1.0 };
                signal_mean = model.photons_per_cycle * fraction;
                // Nuclear flips happen only while the electron cycles; the
                // register then stays dark for the rest of the shot.
                if rng.random::<f64>() >= survival {
                    config = (config + 1 + (rng.random::<f64>() * (pops.len() - 1) as f64) as usize) % pops.len();
                }
            }
            poisson(signal_mean, rng) + poisson(model.background_per_cycle, rng)
        })
        .collect()
}

fn simulate(pops: &[f64], target: Option<usize>, n_nuclei: usize, model: &ReadoutModel, n_shots: usize, seed: u64, label: &str) -> Vec<ReadoutRecord> {
    let shot = |i: usize| {
        let mut rng = rng_from_seed(derive_seed(seed, i as u64));
        ReadoutRecord { shot: i, counts: one_shot(pops, target, n_nuclei, model, &mut rng), state: label.into() }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_shots).into_par_iter().map(shot).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_shots).map(shot).collect()
    }
}

/// Simulates `n_shots` repetitive readouts of nuclear configuration `target`
/// for a register whose nuclear configurations have populations `pops`.
/// Shot `i` draws from `derive_seed(seed, i)`.
pub fn simulate_readout(pops: &[f64], target: usize, model: &ReadoutModel, n_shots: usize, seed: u64, label: &str) -> Result<Vec<ReadoutRecord>> {
    model.validate()?;
    let n_nuclei = check_populations(pops, target)?;
    Ok(simulate(pops, Some(target), n_nuclei, model, n_shots, seed, label))
}

/// Reference readout without the conditional flip: background only.
pub fn simulate_background(model: &ReadoutModel, n_shots: usize, seed: u64) -> Result<Vec<ReadoutRecord>> {
    model.validate()?;
    Ok(simulate(&[1.0], None, 0, model, n_shots, seed, "background"))
}

/// Exact mean counts per cycle of [`simulate_readout`].
pub fn expected_cycle_counts(pops: &[f64], target: usize, model: &ReadoutModel) -> Result<Vec<f64>> {
    model.validate()?;
    let n_nuclei = check_populations(pops, target)?;
    let survival = model.nuclear_survival(n_nuclei);
    Ok((0..model.n_repetitions)
        .map(|c| model.bright_mean() * pops[target] * survival.powi(c as i32) + model.background_per_cycle)
        .collect())
}

/// Normalised nuclear populations estimated from photon counts.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationEstimate {
    /// Populations in configuration order (`⇑⇑, ⇑⇓, ⇓⇑, ⇓⇓` for two nuclei).
    pub populations: Vec<f64>,
    /// Delta-method standard errors of `populations`.
    pub stderr: Vec<f64>,
    /// Background-subtracted signal per configuration before normalisation.
    pub signal: Vec<f64>,
    /// Some background-subtracted signal was negative and set to zero.
    pub clamped: bool,
}

fn window_stats(records: &[ReadoutRecord], n: usize) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Estimation("empty record set".into()));
    }
    let m = records.len() as f64;
    let mean = compensated_sum(records.iter().map(|r| r.window(n) as f64)) / m;
    let var = if records.len() > 1 {
        compensated_sum(records.iter().map(|r| (r.window(n) as f64 - mean).powi(2))) / (m - 1.0)
    } else {
        0.0
    };
    Ok((mean, var / m))
}

/// `p_s = (PL_s − PL_bg) / Σ (PL − PL_bg)` using the first `n_repetitions`
/// cycles of every record.
pub fn estimate_populations(per_state: &[&[ReadoutRecord]], background: &[ReadoutRecord], n_repetitions: usize) -> Result<PopulationEstimate> {
    if per_state.is_empty() || !per_state.len().is_power_of_two() {
        return Err(Error::Estimation(format!("need records for all 2^n configurations, got {}", per_state.len())));
    }
    let (bg, bg_var) = window_stats(background, n_repetitions)?;
    let mut signal = Vec::with_capacity(per_state.len());
    let mut var = Vec::with_capacity(per_state.len());
    let mut clamped = false;
    for records in per_state {
        let (m, v) = window_stats(records, n_repetitions)?;
        let s = m - bg;
        if s < 0.0 {
            clamped = true;
        }
        signal.push(s.max(0.0));
        var.push(v);
    }
    let total: f64 = signal.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Estimation("background-subtracted signal is zero for every configuration".into()));
    }
    let populations: Vec<f64> = signal.iter().map(|s| s / total).collect();
    let n = per_state.len() as f64;
    // ∂p_i/∂m_j = (δ_ij − p_i) / total; the shared background enters every
    // signal, so ∂p_i/∂bg = −(1 − n·p_i) / total.
    let stderr = populations
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let own: f64 = var.iter().enumerate().map(|(j, &vj)| ((if i == j { 1.0 } else { 0.0 }) - p).powi(2) * vj).sum();
            (own + (1.0 - n * p).powi(2) * bg_var).sqrt() / total
        })
        .collect();
    Ok(PopulationEstimate { populations, stderr, signal, clamped })
}

/// `⟨σ_z⟩` of nucleus `nucleus` (0-based among nuclei) from configuration populations.
pub fn nuclear_expectation(pops: &[f64], nucleus: usize) -> Result<f64> {
    if pops.is_empty() || !pops.len().is_power_of_two() {
        return Err(Error::Input(format!("need 2^n populations, got {}", pops.len())));
    }
    let n_nuc = pops.len().trailing_zeros() as usize;
    if nucleus >= n_nuc {
        return Err(Error::Input(format!("nucleus {nucleus} out of range for {n_nuc} nuclei")));
    }
    let bit = n_nuc - 1 - nucleus;
    Ok(pops.iter().enumerate().map(|(k, p)| if (k >> bit) & 1 == 0 { *p } else { -*p }).sum::<f64>().clamp(-1.0, 1.0))
}

/// Histogram of total counts over the first `n` cycles: `(counts, frequency)`.
pub fn count_histogram(records: &[ReadoutRecord], n: usize) -> Vec<(u32, f64)> {
    let max = records.iter().map(|r| r.window(n)).max().unwrap_or(0) as usize;
    let mut bins = vec![0usize; max + 1];
    for r in records {
        bins[r.window(n) as usize] += 1;
    }
    let total = records.len().max(1) as f64;
    bins.into_iter().enumerate().map(|(c, k)| (c as u32, k as f64 / total)).collect()
}
