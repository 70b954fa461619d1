use alloc::vec::Vec;

use super::catalog::TransitionCatalog;
use super::hamiltonian::Channel;
use crate::error::{Error, Result};

/// Lorentzian stick spectrum of one channel on a frequency grid (MHz).
///
/// Each transition contributes `|d|² · p(lower)` times a unit-height
/// Lorentzian of full width `linewidth_mhz`.
pub fn synthesize_spectrum(
    catalog: &TransitionCatalog,
    channel: Channel,
    linewidth_mhz: f64,
    populations: &[f64],
    grid_mhz: &[f64],
) -> Result<Vec<f64>> {
    if !(linewidth_mhz > 0.0) || !linewidth_mhz.is_finite() {
        return Err(Error::Input(alloc::format!("linewidth must be positive, got {linewidth_mhz} MHz")));
    }
    if populations.len() != catalog.dim() {
        return Err(Error::Input(alloc::format!(
            "expected {} populations, got {}",
            catalog.dim(),
            populations.len()
        )));
    }
    let half = linewidth_mhz / 2.0;
    Ok(grid_mhz
        .iter()
        .map(|&f| {
            catalog
                .transitions
                .iter()
                .map(|t| {
                    let w = t.element(channel).norm_sqr() * populations[t.lower];
                    let x = (f - t.freq_mhz) / half;
                    w / (1.0 + x * x)
                })
                .sum()
        })
        .collect())
}

/// Local maximum of a sampled spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub freq_mhz: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima whose prominence exceeds `min_rel_prominence` times the
/// global maximum. Peak positions are refined by a parabola through the
/// three samples around each maximum.
pub fn find_peaks(grid_mhz: &[f64], values: &[f64], min_rel_prominence: f64) -> Vec<Peak> {
    let n = values.len().min(grid_mhz.len());
    let global = values[..n].iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1]) {
            continue;
        }
        let mut left_min = values[i];
        for j in (0..i).rev() {
            if values[j] > values[i] {
                break;
            }
            left_min = left_min.min(values[j]);
        }
        let mut right_min = values[i];
        for &v in &values[i + 1..n] {
            if v > values[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        let prominence = values[i] - left_min.max(right_min);
        if prominence < min_rel_prominence * global {
            continue;
        }
        let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        let shift = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
        let step = (grid_mhz[i + 1] - grid_mhz[i - 1]) / 2.0;
        peaks.push(Peak { freq_mhz: grid_mhz[i] + shift * step, height: y1, prominence });
    }
    peaks
}
