//! ²⁹Si site statistics against binomial closed forms.

use proptest::prelude::*;
use tcenter_core::hyperfine::*;

fn site(label: &str, a_zz: f64, paired: bool) -> SiteRecord {
    SiteRecord {
        label: label.into(),
        distance_angstrom: None,
        a_zz_mhz: a_zz,
        a_xz_left_mhz: 0.2,
        a_xz_right_mhz: paired.then_some(-0.2),
    }
}

fn synthetic() -> SiteTable {
    let records = (0..30).map(|k| site(&format!("S{k}"), (k as f64 - 12.0) * 1.7, k % 3 != 0)).collect();
    SiteTable::new(records, "synthetic").unwrap()
}

fn binomial(n: u64, k: u64, p: f64) -> f64 {
    let ln_choose: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
    (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

#[test]
fn census_matches_binomial_statistics() {
    let table = synthetic();
    let threshold = 2.0;
    let n_strong = count_sites_above(&table, threshold);
    let census = monte_carlo_register(&table, threshold, DEFAULT_ABUNDANCE, 20_000, 17).unwrap();
    let analytic = probability_at_least_one(n_strong, DEFAULT_ABUNDANCE);
    assert_eq!(census.p_at_least_one_analytic, analytic);
    assert!((census.p_at_least_one - analytic).abs() < 3.0 * census.p_at_least_one_stderr, "{} vs {analytic}", census.p_at_least_one);
    let mean = expected_strong_count(&table, threshold, DEFAULT_ABUNDANCE).unwrap();
    let sd = (n_strong as f64 * DEFAULT_ABUNDANCE * (1.0 - DEFAULT_ABUNDANCE) / 20_000.0).sqrt();
    assert!((census.mean_count - mean).abs() < 3.0 * sd, "{} vs {mean}", census.mean_count);
    for k in 0..4 {
        let p = binomial(n_strong as u64, k as u64, DEFAULT_ABUNDANCE);
        let se = (p * (1.0 - p) / 20_000.0).sqrt();
        assert!((census.histogram[k] - p).abs() < 3.0 * se + 1e-12, "k = {k}: {} vs {p}", census.histogram[k]);
    }
}

#[test]
fn full_abundance_populates_every_strong_site() {
    let table = synthetic();
    let n_strong = count_sites_above(&table, 1.0);
    let census = monte_carlo_register(&table, 1.0, 1.0, 100, 1).unwrap();
    assert_eq!(census.histogram[n_strong], 1.0);
    assert_eq!(census.mean_count, n_strong as f64);
    assert_eq!(expected_strong_count(&table, 1.0, 1.0).unwrap(), n_strong as f64);
}

#[test]
fn census_is_reproducible_and_rejects_bad_input() {
    let table = synthetic();
    let a = monte_carlo_register(&table, 2.0, 0.05, 500, 4).unwrap();
    assert_eq!(a, monte_carlo_register(&table, 2.0, 0.05, 500, 4).unwrap());
    assert!(monte_carlo_register(&table, 2.0, 1.2, 10, 4).is_err());
    assert!(monte_carlo_register(&table, 2.0, 0.05, 0, 4).is_err());
    assert!(expected_strong_count(&table, 2.0, -0.1).is_err());
}

#[test]
fn histogram_mode_sits_at_the_dominant_coupling() {
    let records = vec![site("A", 31.9, false), site("B", 33.3, false), site("D", -31.6, true), site("P", -87.6, true), site("E", -6.9, true)];
    let table = SiteTable::new(records, "").unwrap();
    let census = monte_carlo_register(&table, 10.0, 0.3, 5000, 2).unwrap();
    assert_eq!(census.mode_bin(5.0), Some(30.0));
    let hist = census.coupling_histogram(5.0);
    assert!((hist.iter().map(|b| b.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn empty_table_has_no_sites() {
    let t = SiteTable::new(vec![], "").unwrap();
    assert_eq!(t.total_sites(), 0);
    assert_eq!(count_sites_above(&t, 0.0), 0);
    assert_eq!(probability_at_least_one(0, DEFAULT_ABUNDANCE), 0.0);
}

proptest! {
    #[test]
    fn strong_count_never_grows_with_threshold(t1 in 0.0..40.0f64, dt in 0.0..20.0f64) {
        let table = synthetic();
        prop_assert!(count_sites_above(&table, t1 + dt) <= count_sites_above(&table, t1));
    }

    #[test]
    fn at_least_one_probability_is_monotone(n in 0usize..200, p in 0.0..1.0f64) {
        let a = probability_at_least_one(n, p);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(probability_at_least_one(n + 1, p) >= a);
    }
}
