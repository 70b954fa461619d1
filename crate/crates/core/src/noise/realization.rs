use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::process::{sample_detuning_series, DephasingNoise, NoiseProcess};
use crate::error::Result;

/// A deterministic detuning step on one spin starting at `t_start_us`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetuningStep {
    pub spin: usize,
    pub t_start_us: f64,
    pub offset_mhz: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Trace {
    Constant(f64),
    /// Piecewise-linear samples on a uniform grid and their running integral.
    Series { dt_us: f64, values: Vec<f64>, cumulative: Vec<f64> },
}

impl Trace {
    fn integral_to(&self, t: f64) -> f64 {
        match self {
            Trace::Constant(v) => v * t,
            Trace::Series { dt_us, values, cumulative } => {
                if t <= 0.0 {
                    return values[0] * t;
                }
                let last = values.len() - 1;
                let pos = t / dt_us;
                let k = (pos as usize).min(last);
                if k == last {
                    return cumulative[last] + values[last] * (t - last as f64 * dt_us);
                }
                let u = t - k as f64 * dt_us;
                let slope = (values[k + 1] - values[k]) / dt_us;
                cumulative[k] + values[k] * u + 0.5 * slope * u * u
            }
        }
    }
}

/// One sampled noise history: detuning of every spin as a function of time
/// (MHz), plus deterministic steps and per-spin T1.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    traces: Vec<Trace>,
    steps: Vec<DetuningStep>,
    t1_us: Vec<Option<f64>>,
}

impl Realization {
    pub fn quiet(n_spins: usize) -> Self {
        Self { traces: vec![Trace::Constant(0.0); n_spins], steps: Vec::new(), t1_us: vec![None; n_spins] }
    }

    /// Constant detunings per spin, MHz.
    pub fn constant(detunings_mhz: &[f64]) -> Self {
        Self {
            traces: detunings_mhz.iter().map(|&d| Trace::Constant(d)).collect(),
            steps: Vec::new(),
            t1_us: vec![None; detunings_mhz.len()],
        }
    }

    /// Builds a realization from sampled series in kHz on a grid of step `dt_us`.
    pub fn from_series_khz(series: &[Vec<f64>], dt_us: f64) -> Self {
        let traces = series
            .iter()
            .map(|s| {
                let values: Vec<f64> = s.iter().map(|v| v * 1e-3).collect();
                let mut cumulative = Vec::with_capacity(values.len());
                let mut acc = 0.0;
                cumulative.push(0.0);
                for w in values.windows(2) {
                    acc += 0.5 * (w[0] + w[1]) * dt_us;
                    cumulative.push(acc);
                }
                Trace::Series { dt_us, values, cumulative }
            })
            .collect();
        Self { traces, steps: Vec::new(), t1_us: vec![None; series.len()] }
    }

    /// Samples a history covering `[0, total_us]`. Quasi-static spins get a
    /// single constant; OU spins are sampled on a grid of `dt_us`.
    pub fn sample<R: Rng + ?Sized>(noise: &DephasingNoise, dt_us: f64, total_us: f64, rng: &mut R) -> Result<Self> {
        let time_dependent = noise.has_time_dependence();
        let (dt, total) = if time_dependent { (dt_us, total_us) } else { (1.0, 0.0) };
        let series = sample_detuning_series(noise, dt, total, rng)?;
        let mut out = if time_dependent {
            let mut r = Self::from_series_khz(&series, dt);
            for (s, spin) in noise.spins.iter().enumerate() {
                if !matches!(spin.process, NoiseProcess::OrnsteinUhlenbeck { .. }) {
                    r.traces[s] = Trace::Constant(series[s][0] * 1e-3);
                }
            }
            r
        } else {
            Self::constant(&series.iter().map(|s| s[0] * 1e-3).collect::<Vec<_>>())
        };
        out.t1_us = noise.spins.iter().map(|s| s.t1_ms.map(|t| t * 1e3)).collect();
        Ok(out)
    }

    pub fn with_steps(mut self, steps: &[DetuningStep]) -> Self {
        self.steps.extend_from_slice(steps);
        self
    }

    pub fn n_spins(&self) -> usize {
        self.traces.len()
    }

    pub fn t1_us(&self, spin: usize) -> Option<f64> {
        self.t1_us.get(spin).copied().flatten()
    }

    pub fn is_quiet(&self) -> bool {
        self.steps.is_empty() && self.traces.iter().all(|t| matches!(t, Trace::Constant(v) if *v == 0.0))
    }

    /// `∫ δ_s dt` over `[t0, t1]`, MHz·μs.
    pub fn integral(&self, spin: usize, t0: f64, t1: f64) -> f64 {
        let mut acc = match self.traces.get(spin) {
            Some(tr) => tr.integral_to(t1) - tr.integral_to(t0),
            None => 0.0,
        };
        for step in self.steps.iter().filter(|s| s.spin == spin) {
            let a = t0.max(step.t_start_us);
            if t1 > a {
                acc += step.offset_mhz * (t1 - a);
            }
        }
        acc
    }

    /// Mean detuning over `[t0, t1]`, or the instantaneous value if `t0 == t1`.
    pub fn mean(&self, spin: usize, t0: f64, t1: f64) -> f64 {
        if t1 > t0 {
            self.integral(spin, t0, t1) / (t1 - t0)
        } else {
            let h = 1e-9;
            self.integral(spin, t0, t0 + h) / h
        }
    }
}
