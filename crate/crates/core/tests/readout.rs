//! Repetitive readout statistics and population estimation.

use proptest::prelude::*;
use tcenter_core::readout::*;

fn model(photons: f64, p_e: f64, p_n: f64, bg: f64, reps: usize) -> ReadoutModel {
    ReadoutModel { photons_per_cycle: photons, p_e_flip_per_cycle: p_e, p_n_flip_per_cycle: p_n, background_per_cycle: bg, n_repetitions: reps }
}

fn cycle_means(records: &[ReadoutRecord]) -> Vec<f64> {
    let n = records[0].counts.len();
    (0..n).map(|c| records.iter().map(|r| r.counts[c] as f64).sum::<f64>() / records.len() as f64).collect()
}

fn estimate(pops: &[f64], m: &ReadoutModel, shots: usize, seed: u64) -> PopulationEstimate {
    let per_state: Vec<Vec<ReadoutRecord>> =
        (0..pops.len()).map(|s| simulate_readout(pops, s, m, shots, seed + 1 + s as u64, "s").unwrap()).collect();
    let bg = simulate_background(m, shots, seed).unwrap();
    let refs: Vec<&[ReadoutRecord]> = per_state.iter().map(Vec::as_slice).collect();
    estimate_populations(&refs, &bg, m.n_repetitions).unwrap()
}

#[test]
fn population_errors_cover_the_shared_background() {
    let m = ReadoutModel::default();
    let pops = [0.9, 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0];
    let z: Vec<f64> = (0..40u64)
        .map(|k| {
            let e = estimate(&pops, &m, 1000, 100 * k);
            (e.populations[0] - pops[0]) / e.stderr[0]
        })
        .collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
    assert!(mean.abs() < 0.6, "mean pull {mean}");
    assert!((0.6..1.45).contains(&sd), "pull spread {sd}");
}

#[test]
fn perfect_cycling_gives_the_photon_rate_every_cycle() {
    let m = model(3.0, 0.0, 0.0, 0.0, 4);
    let recs = simulate_readout(&[0.0, 1.0, 0.0, 0.0], 1, &m, 20_000, 1, "⇑⇓").unwrap();
    for (c, mean) in cycle_means(&recs).into_iter().enumerate() {
        assert!((mean - 3.0).abs() < 4.0 * (3.0f64 / 20_000.0).sqrt(), "cycle {c}: {mean}");
    }
    assert_eq!(expected_cycle_counts(&[0.0, 1.0, 0.0, 0.0], 1, &m).unwrap(), vec![3.0; 4]);
}

#[test]
fn orthogonal_state_stays_dark() {
    let m = model(3.0, 0.1, 0.05, 0.0, 6);
    let recs = simulate_readout(&[1.0, 0.0, 0.0, 0.0], 3, &m, 500, 2, "⇑⇑").unwrap();
    assert!(recs.iter().all(|r| r.counts.iter().all(|&c| c == 0)));
}

#[test]
fn fluorescence_decays_geometrically_with_cycle_index() {
    // One nucleus: E[counts_N] = η (1 − p_n)^(N−1) · overlap.
    let (eta, p_n, overlap) = (2.0, 0.15, 0.7);
    let m = model(eta, 0.0, p_n, 0.0, 6);
    let shots = 40_000;
    let recs = simulate_readout(&[overlap, 1.0 - overlap], 0, &m, shots, 3, "⇑").unwrap();
    for (c, mean) in cycle_means(&recs).into_iter().enumerate() {
        let oracle = eta * (1.0 - p_n).powi(c as i32) * overlap;
        let sd = (oracle * (1.0 + eta) / shots as f64).sqrt();
        assert!((mean - oracle).abs() < 4.0 * sd, "cycle {c}: {mean} vs {oracle}");
    }
    let exact = expected_cycle_counts(&[overlap, 1.0 - overlap], 0, &m).unwrap();
    for (c, v) in exact.iter().enumerate() {
        assert!((v - eta * (1.0 - p_n).powi(c as i32) * overlap).abs() < 1e-12);
    }
}

#[test]
fn electron_flip_truncates_emission_on_average_by_half() {
    let m = model(4.0, 0.3, 0.0, 0.0, 1);
    let recs = simulate_readout(&[1.0, 0.0], 0, &m, 40_000, 4, "⇑").unwrap();
    let mean = cycle_means(&recs)[0];
    let oracle = 4.0 * (1.0 - 0.3 / 2.0);
    assert!((mean - oracle).abs() < 4.0 * (oracle * 2.0 / 40_000.0f64).sqrt(), "{mean} vs {oracle}");
}

#[test]
fn late_cycle_counts_fall_with_nuclear_flip_rate() {
    let pops = [0.25; 4];
    let late: Vec<f64> = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4]
        .iter()
        .map(|&p_n| *expected_cycle_counts(&pops, 2, &model(2.0, 0.05, p_n, 0.1, 6)).unwrap().last().unwrap())
        .collect();
    assert!(late.windows(2).all(|w| w[1] < w[0]), "{late:?}");
}

#[test]
fn pure_configuration_is_recovered_exactly_with_ideal_readout() {
    let est = estimate(&[0.0, 1.0, 0.0, 0.0], &ReadoutModel::ideal(), 200, 5);
    assert_eq!(est.populations, vec![0.0, 1.0, 0.0, 0.0]);
    assert!(!est.clamped);
}

#[test]
fn maximally_mixed_state_gives_quarters() {
    let m = ReadoutModel::default();
    let est = estimate(&[0.25; 4], &m, 10_000, 6);
    for (p, sd) in est.populations.iter().zip(&est.stderr) {
        assert!((p - 0.25).abs() < 3.0 * sd, "{:?} ± {:?}", est.populations, est.stderr);
    }
    assert!((est.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn estimator_is_unbiased_within_three_sigma() {
    let m = ReadoutModel::default();
    let truth = [0.46, 0.03, 0.06, 0.45];
    let est = estimate(&truth, &m, 10_000, 7);
    for ((p, t), sd) in est.populations.iter().zip(&truth).zip(&est.stderr) {
        assert!((p - t).abs() < 3.0 * sd, "{p} vs {t} ± {sd}");
    }
}

#[test]
fn background_dominated_state_is_clamped() {
    let m = model(1.0, 0.0, 0.0, 2.0, 2);
    let per_state: Vec<Vec<ReadoutRecord>> = (0..4).map(|s| simulate_readout(&[0.0, 0.0, 0.0, 1.0], s, &m, 300, 10 + s as u64, "x").unwrap()).collect();
    let bg = simulate_background(&m, 300, 9).unwrap();
    let refs: Vec<&[ReadoutRecord]> = per_state.iter().map(Vec::as_slice).collect();
    let est = estimate_populations(&refs, &bg, 2).unwrap();
    assert!(est.clamped);
    assert!(est.populations.iter().all(|&p| p >= 0.0));
    assert!((est.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn all_dark_records_are_an_estimation_error() {
    let m = model(1.0, 0.0, 0.0, 0.0, 2);
    let dark = simulate_readout(&[1.0, 0.0, 0.0, 0.0], 1, &m, 10, 1, "x").unwrap();
    let refs = [dark.as_slice(); 4];
    assert!(estimate_populations(&refs, &dark, 2).is_err());
}

#[test]
fn sigma_z_of_the_first_nucleus() {
    assert_eq!(nuclear_expectation(&[0.5, 0.5, 0.0, 0.0], 0).unwrap(), 1.0);
    assert_eq!(nuclear_expectation(&[0.25; 4], 0).unwrap(), 0.0);
    assert_eq!(nuclear_expectation(&[0.0, 0.2, 0.0, 0.8], 1).unwrap(), -1.0);
    assert!(nuclear_expectation(&[0.25; 4], 2).is_err());
}

#[test]
fn readout_is_reproducible_and_histogram_normalised() {
    let m = model(2.0, 0.05, 0.03, 0.2, 6);
    let a = simulate_readout(&[0.4, 0.6], 0, &m, 300, 42, "⇑").unwrap();
    assert_eq!(a, simulate_readout(&[0.4, 0.6], 0, &m, 300, 42, "⇑").unwrap());
    let h = count_histogram(&a, 6);
    assert!((h.iter().map(|b| b.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(simulate_readout(&[1.0, 0.0], 0, &model(1.0, 1.5, 0.0, 0.0, 2), 1, 0, "x").is_err());
    assert!(simulate_readout(&[1.0, 0.0], 0, &model(-1.0, 0.0, 0.0, 0.0, 2), 1, 0, "x").is_err());
    assert!(simulate_readout(&[1.0, 0.0], 0, &model(1.0, 0.0, 0.0, 0.0, 0), 1, 0, "x").is_err());
    assert!(simulate_readout(&[0.7, 0.0], 0, &ReadoutModel::ideal(), 1, 0, "x").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimates_are_normalised(w in prop::array::uniform4(0.01..1.0f64), seed in 0u64..1000) {
        let total: f64 = w.iter().sum();
        let pops: Vec<f64> = w.iter().map(|v| v / total).collect();
        let est = estimate(&pops, &ReadoutModel::default(), 200, seed);
        prop_assert!((est.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(est.populations.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
