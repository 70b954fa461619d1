//! Statistics of ²⁹Si lattice sites around the defect: coupling census and
//! isotope-placement Monte Carlo.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::constants::SI29_ABUNDANCE;
use crate::error::{Error, Result};
use crate::rng::{compensated_sum, derive_seed, rng_from_seed};

/// One symmetry class of lattice sites. Sites off the mirror plane come in
/// left/right pairs with separate transverse couplings (multiplicity 2).
#[derive(Clone, Debug, PartialEq)]
pub struct SiteRecord {
    pub label: String,
    /// Distance to the defect, Å; `None` when unknown.
    pub distance_angstrom: Option<f64>,
    pub a_zz_mhz: f64,
    pub a_xz_left_mhz: f64,
    /// Mirror-partner value; present exactly for paired sites.
    pub a_xz_right_mhz: Option<f64>,
}

impl SiteRecord {
    pub fn multiplicity(&self) -> usize {
        if self.a_xz_right_mhz.is_some() {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SiteTable {
    pub records: Vec<SiteRecord>,
    pub provenance: String,
}

impl SiteTable {
    /// Rejects duplicate labels and non-positive distances.
    pub fn new(records: Vec<SiteRecord>, provenance: impl Into<String>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if records[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::Input(format!("duplicate site label `{}`", r.label)));
            }
            if let Some(d) = r.distance_angstrom {
                if !(d > 0.0) {
                    return Err(Error::Input(format!("site `{}`: distance must be positive, got {d}", r.label)));
                }
            }
            if !r.a_zz_mhz.is_finite() {
                return Err(Error::Input(format!("site `{}`: non-finite A_zz", r.label)));
            }
        }
        Ok(Self { records, provenance: provenance.into() })
    }

    pub fn total_sites(&self) -> usize {
        self.records.iter().map(SiteRecord::multiplicity).sum()
    }

    /// `|A_zz|` of every physical site, mirror pairs expanded.
    pub fn expanded_couplings(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| vec![r.a_zz_mhz.abs(); r.multiplicity()]).collect()
    }
}

/// Multiplicity-weighted number of sites with `|A_zz| > threshold`.
pub fn count_sites_above(table: &SiteTable, threshold_mhz: f64) -> usize {
    table.records.iter().filter(|r| r.a_zz_mhz.abs() > threshold_mhz).map(SiteRecord::multiplicity).sum()
}

/// Sites above threshold within `max_distance` Å, and the number of
/// above-threshold sites skipped because their distance is unknown.
pub fn count_sites_within(table: &SiteTable, threshold_mhz: f64, max_distance_angstrom: f64) -> (usize, usize) {
    let mut count = 0;
    let mut skipped = 0;
    for r in table.records.iter().filter(|r| r.a_zz_mhz.abs() > threshold_mhz) {
        match r.distance_angstrom {
            Some(d) if d <= max_distance_angstrom => count += r.multiplicity(),
            Some(_) => {}
            None => skipped += r.multiplicity(),
        }
    }
    (count, skipped)
}

fn check_abundance(abundance: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&abundance) {
        return Err(Error::Input(format!("abundance must lie in [0, 1], got {abundance}")));
    }
    Ok(())
}

/// Mean number of ²⁹Si nuclei on sites above threshold.
pub fn expected_strong_count(table: &SiteTable, threshold_mhz: f64, abundance: f64) -> Result<f64> {
    check_abundance(abundance)?;
    Ok(count_sites_above(table, threshold_mhz) as f64 * abundance)
}

/// `1 − (1 − abundance)^count`.
pub fn probability_at_least_one(count: usize, abundance: f64) -> f64 {
    1.0 - (1.0 - abundance).powi(count as i32)
}

/// Default natural abundance of ²⁹Si.
pub const DEFAULT_ABUNDANCE: f64 = SI29_ABUNDANCE;

/// Distribution of strongly coupled ²⁹Si over random isotope placements.
#[derive(Clone, Debug, PartialEq)]
pub struct RegisterCensus {
    pub threshold_mhz: f64,
    pub abundance: f64,
    pub samples: usize,
    /// `histogram[k]` = fraction of samples with `k` occupied strong sites.
    pub histogram: Vec<f64>,
    pub p_at_least_one: f64,
    pub p_at_least_one_stderr: f64,
    pub p_at_least_one_analytic: f64,
    pub mean_count: f64,
    /// `(|A_zz|, occupations)` per strong site, summed over samples.
    pub occupations: Vec<(f64, usize)>,
}

impl RegisterCensus {
    /// Occupation-weighted histogram of `|A_zz|` in bins of `bin_width_mhz`:
    /// `(bin lower edge, fraction of occupations)`.
    pub fn coupling_histogram(&self, bin_width_mhz: f64) -> Vec<(f64, f64)> {
        let total: usize = self.occupations.iter().map(|o| o.1).sum();
        let max = self.occupations.iter().map(|o| o.0).fold(0.0, f64::max);
        let n_bins = (max / bin_width_mhz).floor() as usize + 1;
        let mut bins = vec![0usize; n_bins];
        for &(a, n) in &self.occupations {
            bins[(a / bin_width_mhz).floor() as usize] += n;
        }
        bins.into_iter()
            .enumerate()
            .map(|(k, n)| (k as f64 * bin_width_mhz, if total > 0 { n as f64 / total as f64 } else { 0.0 }))
            .collect()
    }

    /// Lower edge of the most populated `|A_zz|` bin.
    pub fn mode_bin(&self, bin_width_mhz: f64) -> Option<f64> {
        self.coupling_histogram(bin_width_mhz)
            .into_iter()
            .filter(|b| b.1 > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
            .map(|b| b.0)
    }
}

/// Populates every site above threshold independently with probability
/// `abundance`; sample `i` draws from `derive_seed(seed, i)`.
pub fn monte_carlo_register(table: &SiteTable, threshold_mhz: f64, abundance: f64, n_samples: usize, seed: u64) -> Result<RegisterCensus> {
    check_abundance(abundance)?;
    if n_samples == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    let strong: Vec<f64> = table.expanded_couplings().into_iter().filter(|&a| a > threshold_mhz).collect();
    let sample = |i: usize| -> Vec<bool> {
        let mut rng = rng_from_seed(derive_seed(seed, i as u64));
        strong.iter().map(|_| rng.random::<f64>() < abundance).collect()
    };
    #[cfg(feature = "parallel")]
    let draws: Vec<Vec<bool>> = {
        use rayon::prelude::*;
        (0..n_samples).into_par_iter().map(sample).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<Vec<bool>> = (0..n_samples).map(sample).collect();

    let mut histogram = vec![0usize; strong.len() + 1];
    let mut occupied = vec![0usize; strong.len()];
    for d in &draws {
        let k = d.iter().filter(|&&x| x).count();
        histogram[k] += 1;
        for (o, &x) in occupied.iter_mut().zip(d) {
            *o += usize::from(x);
        }
    }
    let n = n_samples as f64;
    let p = 1.0 - histogram[0] as f64 / n;
    let mean_count = compensated_sum(histogram.iter().enumerate().map(|(k, &c)| k as f64 * c as f64)) / n;
    Ok(RegisterCensus {
        threshold_mhz,
        abundance,
        samples: n_samples,
        histogram: histogram.iter().map(|&c| c as f64 / n).collect(),
        p_at_least_one: p,
        p_at_least_one_stderr: (p * (1.0 - p) / n).sqrt(),
        p_at_least_one_analytic: probability_at_least_one(strong.len(), abundance),
        mean_count,
        occupations: strong.into_iter().zip(occupied).collect(),
    })
}
