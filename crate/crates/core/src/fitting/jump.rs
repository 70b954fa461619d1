//! Change-point detection of a fringe frequency step.


#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::ramsey::{check_trace, dominant_frequency, fit_ramsey_from, RamseyFit};
use crate::error::FitError;

/// A frequency difference whose accumulated phase over the whole record is
/// below this many cycles is treated as unresolvable.
pub const JUMP_RESOLUTION_CYCLES: f64 = 0.1;

/// Statistical threshold on the frequency difference, in combined standard errors.
pub const JUMP_SIGMA_THRESHOLD: f64 = 3.0;

/// Minimum number of fringe periods each segment must contain.
pub const MIN_PERIODS_PER_SEGMENT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyJump {
    pub f_before: f64,
    pub f_after: f64,
    pub f_before_stderr: f64,
    pub f_after_stderr: f64,
    /// First sample of the second segment; `None` when no jump was resolved.
    pub t_jump: Option<f64>,
    /// Total residual sum of squares of the chosen model.
    pub ssr: f64,
    /// Single damped-cosine fit over the whole trace.
    pub single: RamseyFit,
}

impl FrequencyJump {
    pub fn jump_detected(&self) -> bool {
        self.t_jump.is_some()
    }
}

fn segment_fit(t: &[f64], y: &[f64], fallback: f64) -> Option<RamseyFit> {
    let f0 = dominant_frequency(t, y).unwrap_or(fallback);
    fit_ramsey_from(t, y, f0).ok()
}

/// Fits independent damped cosines before and after every candidate sample
/// and keeps the split with the smallest total residual.
pub fn detect_frequency_jump(t: &[f64], y: &[f64]) -> Result<FrequencyJump, FitError> {
    check_trace(t, y)?;
    let f0 = dominant_frequency(t, y).ok_or_else(|| FitError::new("no spectral peak above the noise floor"))?;
    let single = fit_ramsey_from(t, y, f0)?;
    let m = t.len();
    let span = t[m - 1] - t[0];
    let min_span = MIN_PERIODS_PER_SEGMENT / f0;

    let mut best: Option<(usize, RamseyFit, RamseyFit, f64)> = None;
    for k in 6..m.saturating_sub(5) {
        if t[k - 1] - t[0] < min_span || t[m - 1] - t[k] < min_span {
            continue;
        }
        let (Some(a), Some(b)) = (segment_fit(&t[..k], &y[..k], f0), segment_fit(&t[k..], &y[k..], f0)) else {
            continue;
        };
        let ssr = a.ssr + b.ssr;
        if best.as_ref().map_or(true, |(_, _, _, s)| ssr < *s) {
            best = Some((k, a, b, ssr));
        }
    }

    let no_jump = |single: RamseyFit| FrequencyJump {
        f_before: single.freq,
        f_after: single.freq,
        f_before_stderr: single.freq_stderr,
        f_after_stderr: single.freq_stderr,
        t_jump: None,
        ssr: single.ssr,
        single,
    };
    let Some((k, a, b, ssr)) = best else {
        return Ok(no_jump(single));
    };
    let diff = (a.freq - b.freq).abs();
    let sigma = (a.freq_stderr.powi(2) + b.freq_stderr.powi(2)).sqrt();
    let resolvable = diff > JUMP_RESOLUTION_CYCLES / span && (!sigma.is_finite() || diff > JUMP_SIGMA_THRESHOLD * sigma);
    if !resolvable {
        return Ok(no_jump(single));
    }
    Ok(FrequencyJump {
        f_before: a.freq,
        f_after: b.freq,
        f_before_stderr: a.freq_stderr,
        f_after_stderr: b.freq_stderr,
        t_jump: Some(t[k]),
        ssr,
        single,
    })
}
