//! Classical dephasing noise, its Monte Carlo propagation through
//! sequences, analytic Bell-state coherence times and the superconducting
//! field-jump model.

mod montecarlo;
mod process;
mod realization;

pub use montecarlo::{monte_carlo_decay, DecayCurve, MonteCarloOptions};
pub use process::{sample_detuning_series, sigma_from_t2_star, t2_star_from_sigma, DephasingNoise, NoiseProcess, SpinNoise};
pub use realization::{DetuningStep, Realization};

use alloc::format;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::pulse::{Experiment, Item};

/// Gaussian `T2*` (ms) of the Φ and Ψ two-nucleus coherences under
/// quasi-static noise on the first two nuclei.
///
/// Φ dephases with `δ₁ + δ₂`, Ψ with `δ₁ − δ₂`, so
/// `1/T² = 1/T₁² + 1/T₂² ± 2c/(T₁T₂)`. An infinite value means no decay.
pub fn analytic_bell_t2(noise: &DephasingNoise) -> Result<(f64, f64)> {
    if noise.spins.len() < 3 {
        return Err(Error::Noise("Bell coherence needs two nuclei".into()));
    }
    noise.validate(noise.spins.len())?;
    let sigma = |s: usize| match noise.spins[s].process {
        NoiseProcess::QuasiStatic { sigma_khz } => Ok(sigma_khz),
        NoiseProcess::Off => Ok(0.0),
        NoiseProcess::OrnsteinUhlenbeck { .. } => {
            Err(Error::Noise(format!("spin {s}: analytic Bell T2* needs quasi-static noise")))
        }
    };
    let (a, b, c) = (sigma(1)?, sigma(2)?, noise.nuclear_correlation);
    let var_phi = (a * a + b * b + 2.0 * c * a * b).max(0.0);
    let var_psi = (a * a + b * b - 2.0 * c * a * b).max(0.0);
    let t2 = |var: f64| if var > 0.0 { t2_star_from_sigma(var.sqrt()) } else { f64::INFINITY };
    Ok((t2(var_phi), t2(var_psi)))
}

/// [`analytic_bell_t2`] from single-nucleus Gaussian `T2*` values (ms) and
/// the detuning correlation `c ∈ [−1, 1]`.
pub fn analytic_bell_t2_ms(t2_si_ms: f64, t2_h_ms: f64, correlation: f64) -> Result<(f64, f64)> {
    if !(t2_si_ms > 0.0) || !(t2_h_ms > 0.0) {
        return Err(Error::Noise(format!("T2* values must be positive, got {t2_si_ms} and {t2_h_ms} ms")));
    }
    let noise = DephasingNoise {
        spins: alloc::vec![
            SpinNoise::default(),
            SpinNoise::new(NoiseProcess::from_t2_star_ms(t2_si_ms)),
            SpinNoise::new(NoiseProcess::from_t2_star_ms(t2_h_ms)),
        ],
        nuclear_correlation: correlation,
    };
    analytic_bell_t2(&noise)
}

/// A sudden shift of the electron transition frequency during a Ramsey
/// delay, as produced when a nearby superconductor's field expulsion changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeissnerEvent {
    /// Drop of the electron transition frequency, MHz.
    pub delta_f_mhz: f64,
    /// Jump time measured from the end of the first pulse, μs.
    pub t_jump_us: f64,
}

/// Adds the jump to an experiment as a deterministic electron detuning step
/// of `−delta_f` starting `t_jump` after the end of the first pulse.
pub fn apply_meissner(experiment: &Experiment, event: MeissnerEvent) -> Result<Experiment> {
    if !event.delta_f_mhz.is_finite() || !(event.t_jump_us >= 0.0) {
        return Err(Error::Input(format!("invalid field-jump event {event:?}")));
    }
    let first = experiment
        .variants
        .first()
        .and_then(|v| v.items.first())
        .and_then(|i| match i {
            Item::Pulse(p) if !p.duration_us.is_swept() => Some(p.duration_us.base),
            _ => None,
        })
        .ok_or_else(|| Error::Sequence("field jump needs a fixed-length first pulse".into()))?;
    let mut out = experiment.clone();
    out.options.detuning_steps.push(DetuningStep {
        spin: 0,
        t_start_us: first + event.t_jump_us,
        offset_mhz: -event.delta_f_mhz,
    });
    Ok(out)
}
