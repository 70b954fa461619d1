use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::process::DephasingNoise;
use super::realization::Realization;
use crate::error::{Error, Result};
use crate::pulse::Experiment;
use crate::register::TransitionCatalog;
use crate::rng::{compensated_sum, derive_seed, rng_from_seed};

/// Trajectory-averaged experiment values.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub sweep: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trajectories: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MonteCarloOptions {
    /// Sampling step of time-dependent noise, μs. `None` picks
    /// `min(τ_c / 10, duration / 400)` per sweep point.
    pub dt_us: Option<f64>,
}

/// Averages an experiment over independent noise histories.
///
/// Trajectory `j` of sweep point `i` uses seed `derive(derive(seed, i), j)`
/// and results are reduced in index order with compensated summation, so
/// the output does not depend on thread count.
pub fn monte_carlo_decay(
    experiment: &Experiment,
    catalog: &TransitionCatalog,
    noise: &DephasingNoise,
    trajectories: usize,
    seed: u64,
    options: MonteCarloOptions,
) -> Result<DecayCurve> {
    if trajectories < 2 {
        return Err(Error::Input("need at least two trajectories".into()));
    }
    noise.validate(catalog.n_spins())?;
    experiment.validate()?;
    let sweep = experiment.sweep_values();
    let mut mean = Vec::with_capacity(sweep.len());
    let mut stderr = Vec::with_capacity(sweep.len());
    for (i, &s) in sweep.iter().enumerate() {
        let duration = experiment.duration_us(s);
        let dt = options.dt_us.unwrap_or_else(|| {
            let by_tau = noise.shortest_correlation_time_us().map_or(f64::INFINITY, |t| t / 10.0);
            by_tau.min(duration / 400.0).max(1e-6)
        });
        let point_seed = derive_seed(seed, i as u64);
        let one = |j: usize| -> Result<f64> {
            let mut rng = rng_from_seed(derive_seed(point_seed, j as u64));
            let r = Realization::sample(noise, dt, duration, &mut rng)?;
            experiment.value(catalog, s, &r)
        };
        let values = collect_values(trajectories, one)?;
        let n = values.len() as f64;
        let m = compensated_sum(values.iter().copied()) / n;
        let var = compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1.0);
        mean.push(m);
        stderr.push((var / n).sqrt());
    }
    Ok(DecayCurve { sweep, mean, stderr, trajectories })
}

#[cfg(feature = "parallel")]
fn collect_values<F>(n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn collect_values<F>(n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64>,
{
    (0..n).map(f).collect()
}
