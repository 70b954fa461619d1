//! Register Hamiltonian, level structure and transition catalog against an
//! independent dense-matrix oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tcenter_core::constants::{BOHR_MAGNETON_MHZ_PER_T, GAMMA_H_MHZ_PER_T};
use tcenter_core::fitting::lsq::{levenberg_marquardt, LmOptions, Model};
use tcenter_core::presets;
use tcenter_core::register::*;

fn pauli(axis: usize) -> DMatrix<C64> {
    let (o, i) = (C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let r = |x: f64| C64::new(x, 0.0);
    match axis {
        0 => DMatrix::from_row_slice(2, 2, &[o, r(0.5), r(0.5), o]),
        1 => DMatrix::from_row_slice(2, 2, &[o, -i * 0.5, i * 0.5, o]),
        _ => DMatrix::from_row_slice(2, 2, &[r(0.5), o, o, r(-0.5)]),
    }
}

/// Spin-½ operator on `spin` of an `n`-spin register, spin 0 most significant.
fn embed(n: usize, spin: usize, axis: usize) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for s in 0..n {
        let f = if s == spin { pauli(axis) } else { DMatrix::identity(2, 2) };
        m = m.kronecker(&f);
    }
    m
}

/// Hamiltonian written out directly from the model definition.
fn oracle_hamiltonian(cfg: &RegisterConfig) -> DMatrix<C64> {
    let n = cfg.n_spins();
    let c = |x: f64| C64::new(x, 0.0);
    let mut h = embed(n, 0, 2) * c(cfg.g_electron * BOHR_MAGNETON_MHZ_PER_T * cfg.b_field_t);
    for (k, nuc) in cfg.nuclei.iter().enumerate() {
        h -= embed(n, k + 1, 2) * c(nuc.gyro_mhz_per_t * cfg.b_field_t);
        let rows: Vec<usize> = if cfg.mode == CouplingMode::Secular { vec![2] } else { vec![0, 1, 2] };
        for e in rows {
            for a in 0..3 {
                h += embed(n, 0, e) * embed(n, k + 1, a) * c(nuc.hyperfine.0[e][a]);
            }
        }
    }
    if n >= 3 {
        h += embed(n, 1, 2) * embed(n, 2, 2) * c(cfg.j_coupling_khz * 1e-3);
    }
    h
}

fn oracle_energies(cfg: &RegisterConfig) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(oracle_hamiltonian(cfg)).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn label(s: &str) -> LevelLabel {
    LevelLabel::parse(s).unwrap()
}

fn canonical() -> TransitionCatalog {
    transition_catalog(&presets::register(CouplingMode::Secular)).unwrap()
}

#[test]
fn canonical_hamiltonian_matches_oracle() {
    for mode in [CouplingMode::Secular, CouplingMode::Full] {
        let cfg = presets::register(mode);
        let h = build_hamiltonian(&cfg).unwrap();
        let o = oracle_hamiltonian(&cfg);
        for i in 0..8 {
            for j in 0..8 {
                assert!((h[(i, j)] - o[(i, j)]).norm() < 1e-9, "({i},{j})");
            }
        }
        let cat = transition_catalog(&cfg).unwrap();
        for (a, b) in cat.energies().iter().zip(oracle_energies(&cfg)) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn hydrogen_nmr_lines_close_on_extracted_parameters() {
    let cat = canonical();
    let down = cat.nmr_line(label("↓⇓⇑"), 1).unwrap().freq_mhz;
    let up = cat.nmr_line(label("↑⇓⇑"), 1).unwrap().freq_mhz;
    assert!((down - 10.005).abs() < 1e-3, "{down}");
    assert!((up - 12.141).abs() < 1e-3, "{up}");
    let (zeeman, a_par) = extract_spin_params(10.005, 12.141).unwrap();
    assert!((zeeman - 11.073).abs() < 1e-9 && (a_par - 1.068).abs() < 1e-9);
    let gamma = gyro_from_zeeman(zeeman, field_from_esr(7.3, 2.005).unwrap()).unwrap();
    assert!((42.4..=42.7).contains(&gamma), "{gamma}");
}

#[test]
fn extracted_parameters_rebuild_the_lines() {
    // Electron plus one ¹H with the extracted Zeeman and hyperfine values.
    let (zeeman, a_par) = (11.073, 1.068);
    let cfg = RegisterConfig {
        b_field_t: zeeman / GAMMA_H_MHZ_PER_T,
        g_electron: 2.005,
        nuclei: vec![Nucleus::new(Species::Hydrogen, HyperfineTensor::axial(-2.0 * a_par, 0.0, 0.0))],
        j_coupling_khz: 0.0,
        mode: CouplingMode::Secular,
    };
    let cat = transition_catalog(&cfg).unwrap();
    let down = cat.nmr_line(label("↓⇑"), 0).unwrap().freq_mhz;
    let up = cat.nmr_line(label("↑⇑"), 0).unwrap().freq_mhz;
    assert!((down - (zeeman - a_par)).abs() < 1e-3 && (up - (zeeman + a_par)).abs() < 1e-3);
    assert_eq!(extract_spin_params(11.073, 11.073).unwrap(), (11.073, 0.0));
}

#[test]
fn electron_splitting_round_trips_through_field() {
    let b = field_from_esr(7.3, 2.005).unwrap();
    assert!((b - 0.2601).abs() < 1e-4);
    let cfg = RegisterConfig { b_field_t: b, g_electron: 2.005, nuclei: vec![], j_coupling_khz: 0.0, mode: CouplingMode::Secular };
    let e = transition_catalog(&cfg).unwrap().energies();
    let f_ghz = (e[1] - e[0]) * 1e-3;
    assert!((f_ghz / 7.3 - 1.0).abs() < 1e-9, "{f_ghz}");
    assert!((f_ghz - 7.3003).abs() < 1e-3);
}

#[test]
fn zero_register_is_zero_operator() {
    let mut cfg = presets::register(CouplingMode::Full);
    cfg.b_field_t = 0.0;
    for n in &mut cfg.nuclei {
        n.hyperfine = HyperfineTensor([[0.0; 3]; 3]);
    }
    cfg.j_coupling_khz = 0.0;
    assert_eq!(build_hamiltonian(&cfg).unwrap().max_abs(), 0.0);
}

#[test]
fn levels_group_by_electron_manifold() {
    let cat = canonical();
    let e = cat.energies();
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    for k in 0..8 {
        assert_eq!(cat.label(k).electron_up(), k >= 4, "level {k} is {}", cat.label(k));
    }
    let v = cat.levels.basis();
    assert!(v.unitarity_error() < 1e-10);
}

#[test]
fn secular_and_full_gaps_agree_below_one_khz() {
    let sec = canonical();
    let full = transition_catalog(&presets::register(CouplingMode::Full)).unwrap();
    for t in sec.transitions.iter().filter(|t| t.kind == TransitionKind::ElectronConserving) {
        let (a, b) = (sec.label(t.lower), sec.label(t.upper));
        let f = full.between(a, b).unwrap().freq_mhz;
        assert!((f - t.freq_mhz).abs() < 1e-3, "{a}↔{b}: {} vs {f}", t.freq_mhz);
    }
}

#[test]
fn pure_zeeman_register_has_one_esr_line() {
    let mut cfg = presets::register(CouplingMode::Full);
    for n in &mut cfg.nuclei {
        n.hyperfine = HyperfineTensor([[0.0; 3]; 3]);
    }
    cfg.j_coupling_khz = 0.0;
    let cat = transition_catalog(&cfg).unwrap();
    let mut esr: Vec<f64> =
        cat.transitions.iter().filter(|t| t.kind == TransitionKind::ElectronFlipping).map(|t| t.freq_mhz).collect();
    esr.sort_by(f64::total_cmp);
    assert_eq!(esr.len(), 4);
    assert!(esr[3] - esr[0] < 1e-6);
    assert_eq!(cat.count_kind(TransitionKind::NuclearFlipping), 0);
}

#[test]
fn four_resolved_esr_lines_with_conditional_splittings() {
    let cat = canonical();
    let f = |s: &str| cat.esr_line(label(s)).unwrap().freq_mhz;
    let si_split = (f("↓⇑⇑") - f("↓⇓⇑")).abs();
    let h_split = (f("↓⇑⇑") - f("↓⇑⇓")).abs();
    // The preset ²⁹Si tensor puts these lines 7.2 MHz apart.
    assert!((si_split - 6.9).abs() < 0.5, "{si_split}");
    assert!((h_split - 2.136).abs() < 0.01, "{h_split}");
}

#[test]
fn full_mode_adds_weak_nuclear_flipping_lines() {
    let sec = canonical();
    let full = transition_catalog(&presets::register(CouplingMode::Full)).unwrap();
    assert!(full.count_kind(TransitionKind::NuclearFlipping) > sec.count_kind(TransitionKind::NuclearFlipping));
    let strongest_conserving = full
        .transitions
        .iter()
        .filter(|t| t.kind == TransitionKind::ElectronFlipping)
        .map(Transition::abs_drive)
        .fold(f64::INFINITY, f64::min);
    for t in full.transitions.iter().filter(|t| t.kind == TransitionKind::NuclearFlipping) {
        assert!(t.abs_drive() < 0.1 * strongest_conserving);
        let nearest = full
            .transitions
            .iter()
            .filter(|c| c.kind == TransitionKind::ElectronFlipping)
            .map(|c| (c.freq_mhz - t.freq_mhz).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 30.0, "nuclear-flipping line {} MHz far from any ESR", t.freq_mhz);
    }
}

/// Two Lorentzians of common full width plus a constant: [a1, c1, a2, c2, w, bg].
struct LorentzianPair;

impl Model for LorentzianPair {
    fn n_params(&self) -> usize {
        6
    }
    fn eval(&self, f: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let half = p[4] / 2.0;
        let mut value = p[5];
        g[4] = 0.0;
        for k in 0..2 {
            let x = (f - p[2 * k + 1]) / half;
            let l = 1.0 / (1.0 + x * x);
            value += p[2 * k] * l;
            g[2 * k] = l;
            g[2 * k + 1] = p[2 * k] * l * l * 2.0 * x / half;
            g[4] += p[2 * k] * l * l * x * x / p[4] * 2.0;
        }
        g[5] = 1.0;
        value
    }
}

#[test]
fn broad_spectrum_shows_two_composite_peaks() {
    let cat = canonical();
    let pops = vec![1.0 / 8.0; 8];
    let centre = cat.config.g_electron * BOHR_MAGNETON_MHZ_PER_T * cat.config.b_field_t;
    let grid: Vec<f64> = (0..801).map(|i| centre - 20.0 + i as f64 * 0.05).collect();
    let s = synthesize_spectrum(&cat, Channel::Mw, 3.1, &pops, &grid).unwrap();
    let peaks = find_peaks(&grid, &s, 0.05);
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    let offsets: Vec<f64> = grid.iter().map(|f| f - centre).collect();
    let p0 = [peaks[0].height, peaks[0].freq_mhz - centre, peaks[1].height, peaks[1].freq_mhz - centre, 3.1, 0.0];
    let fit = levenberg_marquardt(&LorentzianPair, &offsets, &s, None, &p0, LmOptions::default()).unwrap();
    let split = (fit.params[3] - fit.params[1]).abs();
    // The preset ²⁹Si tensor puts these lines 7.2 MHz apart.
    assert!((split - 6.9).abs() < 0.5, "{split}");
    let mid = 0.5 * (fit.params[1] + fit.params[3]);
    assert!(mid.abs() < 0.5, "centre offset {mid} MHz");
}

#[test]
fn narrow_spectrum_resolves_four_lines() {
    let cat = canonical();
    let pops = vec![1.0 / 8.0; 8];
    let lines: Vec<f64> = ["⇑⇑", "⇑⇓", "⇓⇑", "⇓⇓"].iter().map(|n| cat.esr_line(label(&format!("↓{n}"))).unwrap().freq_mhz).collect();
    let lo = lines.iter().copied().fold(f64::INFINITY, f64::min) - 5.0;
    let grid: Vec<f64> = (0..20001).map(|i| lo + i as f64 * 0.001).collect();
    let s = synthesize_spectrum(&cat, Channel::Mw, 0.1, &pops, &grid).unwrap();
    let peaks = find_peaks(&grid, &s, 0.05);
    assert_eq!(peaks.len(), 4, "{peaks:?}");
    for line in lines {
        assert!(peaks.iter().any(|p| (p.freq_mhz - line).abs() < 2e-3), "line {line} not found");
    }
}

#[test]
fn single_transition_spectrum_peaks_on_the_line() {
    let cfg = RegisterConfig { b_field_t: 0.26, g_electron: 2.0, nuclei: vec![], j_coupling_khz: 0.0, mode: CouplingMode::Secular };
    let cat = transition_catalog(&cfg).unwrap();
    let f0 = cat.transitions[0].freq_mhz;
    let grid: Vec<f64> = (0..201).map(|i| f0 - 1.0 + i as f64 * 0.01).collect();
    let s = synthesize_spectrum(&cat, Channel::Mw, 0.2, &[1.0, 0.0], &grid).unwrap();
    let peaks = find_peaks(&grid, &s, 0.01);
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0].freq_mhz - f0).abs() < 1e-6);
}

#[test]
fn drive_matrices_are_hermitian_in_the_eigenbasis() {
    let cat = transition_catalog(&presets::register(CouplingMode::Full)).unwrap();
    for ch in [Channel::Mw, Channel::Rf] {
        for i in 0..8 {
            for j in 0..8 {
                assert!((cat.element(ch, i, j) - cat.element(ch, j, i).conj()).norm() < 1e-12);
            }
        }
    }
    let e = cat.energies();
    for t in &cat.transitions {
        assert!(t.freq_mhz >= 0.0);
        assert!((t.freq_mhz - (e[t.upper] - e[t.lower])).abs() < 1e-9);
    }
}

fn arb_config() -> impl Strategy<Value = RegisterConfig> {
    let tensor = prop::array::uniform3(prop::array::uniform3(-50.0..50.0f64));
    (0.0..1.0f64, tensor.clone(), tensor, -5.0..5.0f64, any::<bool>()).prop_map(|(b, a_si, a_h, j, full)| RegisterConfig {
        b_field_t: b,
        g_electron: 2.005,
        nuclei: vec![
            Nucleus::new(Species::Silicon29, HyperfineTensor(a_si)),
            Nucleus::new(Species::Hydrogen, HyperfineTensor(a_h)),
        ],
        j_coupling_khz: j,
        mode: if full { CouplingMode::Full } else { CouplingMode::Secular },
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian_and_traceless(cfg in arb_config()) {
        let h = build_hamiltonian(&cfg).unwrap();
        let scale = h.max_abs().max(1.0);
        prop_assert!(h.hermiticity_error() <= 1e-12 * scale);
        prop_assert!(h.trace().norm() < 1e-9);
        if cfg.mode == CouplingMode::Secular {
            let sz = SpinOperators::new(3).z(0).clone();
            prop_assert!(h.commutator(&sz).max_abs() < 1e-10);
        }
    }

    #[test]
    fn eigensolver_matches_dense_oracle(cfg in arb_config()) {
        let cat = transition_catalog(&cfg).unwrap();
        for (a, b) in cat.energies().iter().zip(oracle_energies(&cfg)) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{} vs {}", a, b);
        }
        prop_assert!(cat.levels.basis().unitarity_error() < 1e-10);
        let labels: Vec<String> = cat.levels.levels.iter().filter(|l| !l.mixed).map(|l| l.label.ascii()).collect();
        let mut unique = labels.clone();
        unique.sort();
        unique.dedup();
        prop_assert_eq!(unique.len(), labels.len());
    }

    #[test]
    fn two_spin_secular_lines_are_analytic(b in 0.05..1.0f64, a_zz in -50.0..50.0f64) {
        let cfg = RegisterConfig {
            b_field_t: b,
            g_electron: 2.005,
            nuclei: vec![Nucleus::new(Species::Hydrogen, HyperfineTensor::axial(a_zz, 0.0, 0.0))],
            j_coupling_khz: 0.0,
            mode: CouplingMode::Secular,
        };
        let cat = transition_catalog(&cfg).unwrap();
        let w = GAMMA_H_MHZ_PER_T * b;
        let down = cat.nmr_line(label("↓⇑"), 0).unwrap().freq_mhz;
        let up = cat.nmr_line(label("↑⇑"), 0).unwrap().freq_mhz;
        prop_assert!((down - (w + a_zz / 2.0).abs()).abs() < 1e-9);
        prop_assert!((up - (w - a_zz / 2.0).abs()).abs() < 1e-9);
    }
}
