//! Damped-cosine fits of Ramsey fringes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::lsq::{levenberg_marquardt, Covariance, LmOptions, LsqSolution, Model};
use crate::error::FitError;

/// Periodogram peak must exceed this multiple of the mean periodogram power.
pub const PEAK_TO_FLOOR_MIN: f64 = 4.0;

/// Fitted `y = A·exp(−(t/T2*)²)·cos(2π f t + φ) + c`.
///
/// `T2*` is the 1/e point of the Gaussian envelope. `covariance` is over
/// `[a, b, freq, kappa, offset]` with `a = A cos φ`, `b = −A sin φ` and
/// `kappa = 1/T2*²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RamseyFit {
    pub freq: f64,
    pub freq_stderr: f64,
    pub t2_star: f64,
    pub t2_star_stderr: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub covariance: Covariance,
    pub ssr: f64,
    pub rms_residual: f64,
    /// Envelope consistent with no decay; `t2_star` is +∞.
    pub no_decay: bool,
}

/// `[a, b, f, κ, c]`, envelope `exp(−κ t²)`.
pub(crate) struct DampedCosine;

impl Model for DampedCosine {
    fn n_params(&self) -> usize {
        5
    }

    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (a, b, f, kappa) = (p[0], p[1], p[2], p[3]);
        let env = (-kappa * t * t).exp();
        let (s, c) = (TAU * f * t).sin_cos();
        let osc = a * c + b * s;
        g[0] = env * c;
        g[1] = env * s;
        g[2] = env * (-a * s + b * c) * TAU * t;
        g[3] = -t * t * env * osc;
        g[4] = 1.0;
        env * osc + p[4]
    }
}

/// Dominant non-zero frequency of `y − mean(y)` on a zero-padded grid.
/// Returns `None` when no bin rises above the noise floor.
pub fn dominant_frequency(t: &[f64], y: &[f64]) -> Option<f64> {
    let m = t.len();
    let span = t[m - 1] - t[0];
    if !(span > 0.0) {
        return None;
    }
    let mean = y.iter().sum::<f64>() / m as f64;
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist = 0.5 / dt_min;
    let df = 1.0 / (8.0 * span);
    let bins = ((nyquist / df).floor() as usize).max(2);
    let power: Vec<f64> = (0..=bins)
        .map(|k| {
            let f = k as f64 * df;
            let (mut re, mut im) = (0.0, 0.0);
            for (&ti, &yi) in t.iter().zip(y) {
                let (s, c) = (TAU * f * ti).sin_cos();
                re += (yi - mean) * c;
                im += (yi - mean) * s;
            }
            re * re + im * im
        })
        .collect();
    let floor = power.iter().sum::<f64>() / power.len() as f64;
    // Ignore the DC lobe: frequencies below one cycle over the record.
    let first = (1.0 / span / df).ceil() as usize;
    let (k, &peak) = power.iter().enumerate().skip(first).max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) || peak < PEAK_TO_FLOOR_MIN * floor {
        return None;
    }
    // Parabolic refinement on the padded grid.
    let refine = if k + 1 < power.len() {
        let (l, c, r) = (power[k - 1], peak, power[k + 1]);
        let den = l - 2.0 * c + r;
        if den < 0.0 { 0.5 * (l - r) / den } else { 0.0 }
    } else {
        0.0
    };
    Some((k as f64 + refine) * df)
}

/// `span` is the record length; decay below `1e-9` over it, or within two
/// standard errors of zero, counts as none.
fn solution_to_fit(sol: LsqSolution, span: f64) -> RamseyFit {
    let p = &sol.params;
    let (a, b, f, kappa, c) = (p[0], p[1], p[2].abs(), p[3], p[4]);
    let b = if p[2] < 0.0 { -b } else { b };
    let cov = sol.covariance;
    let kappa_sd = cov.stderr(3);
    let no_decay = kappa * span * span <= 1e-9 || (kappa_sd.is_finite() && kappa <= 2.0 * kappa_sd);
    let (t2, t2_sd) = if no_decay {
        (f64::INFINITY, f64::NAN)
    } else {
        let t2 = 1.0 / kappa.sqrt();
        (t2, 0.5 * kappa_sd * t2 / kappa)
    };
    RamseyFit {
        freq: f,
        freq_stderr: cov.stderr(2),
        t2_star: t2,
        t2_star_stderr: t2_sd,
        phase: (-b).atan2(a),
        amplitude: (a * a + b * b).sqrt(),
        offset: c,
        covariance: cov,
        ssr: sol.ssr,
        rms_residual: sol.rms_residual,
        no_decay,
    }
}

/// Fits at a given starting frequency, trying several envelope seeds.
pub(crate) fn fit_ramsey_from(t: &[f64], y: &[f64], f0: f64) -> Result<RamseyFit, FitError> {
    let m = t.len();
    let mean = y.iter().sum::<f64>() / m as f64;
    // Linear seeds for the quadratures at fixed frequency.
    let (mut cc, mut ss, mut cs, mut cy, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (TAU * f0 * ti).sin_cos();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        cy += c * (yi - mean);
        sy += s * (yi - mean);
    }
    let det = cc * ss - cs * cs;
    let (a0, b0) = if det.abs() > 1e-300 { ((cy * ss - sy * cs) / det, (sy * cc - cy * cs) / det) } else { (0.0, 0.0) };
    let span = t[m - 1] - t[0];
    let mut best: Option<RamseyFit> = None;
    let mut last_err = None;
    for k0 in [0.0, 0.25 / (span * span), 1.0 / (span * span), 4.0 / (span * span), 16.0 / (span * span)] {
        let boost = (k0 * span * span / 3.0).exp().min(20.0);
        let p0 = [a0 * boost, b0 * boost, f0, k0, mean];
        match levenberg_marquardt(&DampedCosine, t, y, None, &p0, LmOptions::default()) {
            Ok(sol) => {
                let fit = solution_to_fit(sol, span);
                if best.as_ref().map_or(true, |b| fit.ssr < b.ssr) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| FitError::new("Ramsey fit failed")))
}

pub(crate) fn check_trace(t: &[f64], y: &[f64]) -> Result<(), FitError> {
    if t.len() != y.len() {
        return Err(FitError::new(format!("{} abscissae but {} values", t.len(), y.len())));
    }
    if t.len() < 6 {
        return Err(FitError::new(format!("need at least 6 points, got {}", t.len())));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::new("abscissae must be strictly increasing"));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::new("non-finite input value"));
    }
    Ok(())
}

/// Fits a Gaussian-damped cosine, seeding the frequency from the periodogram.
pub fn fit_ramsey(t: &[f64], y: &[f64]) -> Result<RamseyFit, FitError> {
    check_trace(t, y)?;
    let f0 = dominant_frequency(t, y).ok_or_else(|| FitError::new("no spectral peak above the noise floor"))?;
    fit_ramsey_from(t, y, f0)
}

/// Fits a Gaussian-damped cosine at a known frequency `omega` (cycles per
/// unit of `t`) and returns the envelope decay.
pub fn fit_ramsey_fixed_frequency(t: &[f64], y: &[f64], omega: f64) -> Result<RamseyFit, FitError> {
    check_trace(t, y)?;
    if !(omega > 0.0) {
        return Err(FitError::new(format!("fringe frequency must be positive, got {omega}")));
    }
    struct Fixed(f64);
    impl Model for Fixed {
        fn n_params(&self) -> usize {
            4
        }
        fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
            let full = [p[0], p[1], self.0, p[2], p[3]];
            let mut gf = [0.0; 5];
            let v = DampedCosine.eval(t, &full, &mut gf);
            g[0] = gf[0];
            g[1] = gf[1];
            g[2] = gf[3];
            g[3] = gf[4];
            v
        }
    }
    let seed = fit_ramsey_from(t, y, omega).ok();
    let span = t[t.len() - 1] - t[0];
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut starts: Vec<[f64; 4]> = Vec::new();
    if let Some(s) = &seed {
        let a = s.amplitude * s.phase.cos();
        let b = -s.amplitude * s.phase.sin();
        let kappa = if s.t2_star.is_finite() { 1.0 / (s.t2_star * s.t2_star) } else { 0.0 };
        starts.push([a, b, kappa, s.offset]);
    }
    let amp = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    starts.push([amp, 0.0, 1.0 / (span * span), mean]);
    let mut best: Option<RamseyFit> = None;
    let mut last_err = None;
    for p0 in starts {
        match levenberg_marquardt(&Fixed(omega), t, y, None, &p0, LmOptions::default()) {
            Ok(sol) => {
                let p = &sol.params;
                let n = 4;
                // Embed into the five-parameter layout with a zero-variance frequency.
                let mut values = vec![0.0; 25];
                let map = [0usize, 1, 3, 4];
                for i in 0..n {
                    for j in 0..n {
                        values[map[i] * 5 + map[j]] = sol.covariance.get(i, j);
                    }
                }
                let full = LsqSolution {
                    params: vec![p[0], p[1], omega, p[2], p[3]],
                    covariance: Covariance { n: 5, values },
                    ssr: sol.ssr,
                    rms_residual: sol.rms_residual,
                    iterations: sol.iterations,
                };
                let fit = solution_to_fit(full, span);
                if best.as_ref().map_or(true, |b| fit.ssr < b.ssr) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| FitError::new("Ramsey fit failed")))
}
