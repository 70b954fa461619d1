//! Pulse propagation and experiment protocols against closed-form oracles.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tcenter_core::fitting::fit_ramsey;
use tcenter_core::noise::{monte_carlo_decay, DephasingNoise, MonteCarloOptions, NoiseProcess, SpinNoise};
use tcenter_core::presets;
use tcenter_core::pulse::*;
use tcenter_core::register::*;

fn label(s: &str) -> LevelLabel {
    LevelLabel::parse(s).unwrap()
}

fn canonical() -> TransitionCatalog {
    transition_catalog(&presets::register(CouplingMode::Secular)).unwrap()
}

/// Bare electron at 0.26 T: one two-level transition.
fn electron_only() -> TransitionCatalog {
    transition_catalog(&RegisterConfig {
        b_field_t: 0.26,
        g_electron: 2.005,
        nuclei: vec![],
        j_coupling_khz: 0.0,
        mode: CouplingMode::Secular,
    })
    .unwrap()
}

fn mw(freq: f64, phase: f64, rabi: f64, t: f64) -> Item {
    Item::Pulse(Pulse {
        channel: Channel::Mw,
        freq_mhz: freq.into(),
        phase_rad: phase.into(),
        rabi_mhz: rabi.into(),
        duration_us: t.into(),
    })
}

fn run_once(cat: &TransitionCatalog, rho: &DensityMatrix, items: Vec<Item>, opts: &RunOptions) -> DensityMatrix {
    run_sequence(rho, &Sequence::new(items), cat, opts).unwrap().remove(0).state
}

/// Generalized Rabi formula, rates in cycles per μs.
fn rabi_flip(omega: f64, delta: f64, t: f64) -> f64 {
    let w = (omega * omega + delta * delta).sqrt();
    if w == 0.0 {
        return 0.0;
    }
    (omega / w).powi(2) * (PI * w * t).sin().powi(2)
}

fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    (&a.0 - &b.0).max_abs()
}

#[test]
fn empty_sequence_leaves_state_unchanged() {
    let cat = canonical();
    let rho = DensityMatrix::from_populations(&[0.1, 0.2, 0.05, 0.05, 0.1, 0.2, 0.2, 0.1]).unwrap();
    let out = run_once(&cat, &rho, vec![], &RunOptions::for_catalog(&cat));
    assert_eq!(out, rho);
}

#[test]
fn electron_pi_pulse_flips_the_selected_line() {
    let cat = canonical();
    let start = label("↓⇓⇓");
    let t = cat.esr_line(start).unwrap();
    let rho = DensityMatrix::pure(&cat, start).unwrap();
    let out = run_once(&cat, &rho, vec![mw(t.freq_mhz, 0.0, 5.556, 0.09)], &RunOptions::for_catalog(&cat));
    assert!(out.electron_up(&cat) > 0.999, "{}", out.electron_up(&cat));
    // The tilted ²⁹Si axis in the upper manifold shares a little weight with the Si-flipped level.
    let flipped = out.population(&cat, start.with_spin(0, true)).unwrap();
    assert!(flipped > 0.99, "{flipped}");
    // Other nuclear configurations stay dark.
    let other = DensityMatrix::pure(&cat, label("↓⇑⇑")).unwrap();
    let out = run_once(&cat, &other, vec![mw(t.freq_mhz, 0.0, 5.556, 0.09)], &RunOptions::for_catalog(&cat));
    assert!(out.electron_up(&cat) < 0.05);
}

#[test]
fn ideal_pi_pulse_inverts_exactly() {
    let cat = electron_only();
    let f = cat.transitions[0].freq_mhz;
    let d = cat.transitions[0].abs_drive();
    let rho = DensityMatrix::pure(&cat, label("↓")).unwrap();
    let out = run_once(&cat, &rho, vec![mw(f, 0.3, 2.0, 1.0 / (2.0 * 2.0 * d))], &RunOptions::for_catalog(&cat));
    assert!((out.electron_up(&cat) - 1.0).abs() < 1e-9);
}

#[test]
fn spectator_flip_matches_two_level_formula() {
    let cat = canonical();
    let rabi = 0.001;
    let target = *cat.nmr_line(label("↓⇓⇑"), 1).unwrap();
    let spectator = *cat.nmr_line(label("↓⇑⇑"), 1).unwrap();
    let delta = spectator.freq_mhz - target.freq_mhz;
    assert!((delta.abs() - 0.002).abs() < 1e-5, "{delta}");
    let p = rotation_pulse(&cat, &target, PI, Param::fixed(0.0), rabi).unwrap();
    let t = p.duration_us.base;
    let rho = DensityMatrix::pure(&cat, label("↓⇑⇑")).unwrap();
    let out = run_once(&cat, &rho, vec![Item::Pulse(p)], &RunOptions::for_catalog(&cat));
    let sim = out.population(&cat, label("↓⇑⇓")).unwrap();
    let oracle = rabi_flip(rabi * spectator.element(Channel::Rf).norm(), delta, t);
    assert!((sim - oracle).abs() < 1e-4, "{sim} vs {oracle}");
    assert!((oracle - 0.027).abs() < 2e-3);
    let target_rho = DensityMatrix::pure(&cat, label("↓⇓⇑")).unwrap();
    let out = run_once(&cat, &target_rho, vec![Item::Pulse(p)], &RunOptions::for_catalog(&cat));
    assert!(out.population(&cat, label("↓⇓⇓")).unwrap() > 0.999);
}

#[test]
fn two_half_pulses_compose_to_a_pi_pulse() {
    let cat = canonical();
    let t = *cat.esr_line(label("↓⇑⇓")).unwrap();
    let rho = DensityMatrix::pure(&cat, label("↓⇑⇓")).unwrap();
    let opts = RunOptions::for_catalog(&cat);
    let full = run_once(&cat, &rho, vec![mw(t.freq_mhz, 0.4, 5.556, 0.09)], &opts);
    let halves = run_once(&cat, &rho, vec![mw(t.freq_mhz, 0.4, 5.556, 0.045), mw(t.freq_mhz, 0.4, 5.556, 0.045)], &opts);
    assert!(max_diff(&full, &halves) < 1e-9);
}

#[test]
fn xy8_is_self_inverse_on_a_resonant_qubit() {
    let cat = electron_only();
    let f = cat.transitions[0].freq_mhz;
    let d = cat.transitions[0].abs_drive();
    let t_pi = 1.0 / (2.0 * 5.0 * d);
    let s = 0.5f64.sqrt();
    let rho = DensityMatrix::from_amplitudes(&[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
    let phases = ExperimentKind::Xy8(1).refocusing_phases().unwrap();
    let items: Vec<Item> = phases.iter().map(|&ph| mw(f, ph, 5.0, t_pi)).collect();
    let out = run_once(&cat, &rho, items, &RunOptions::for_catalog(&cat));
    assert!(max_diff(&out, &rho) < 1e-8);
}

#[test]
fn halving_the_rwa_cutoff_changes_probabilities_below_1e_4() {
    let cat = canonical();
    let esr = *cat.esr_line(label("↓⇓⇓")).unwrap();
    let nmr = *cat.nmr_line(label("↓⇑⇑"), 0).unwrap();
    let cases = [
        (label("↓⇓⇓"), rotation_pulse(&cat, &esr, PI, Param::fixed(0.0), DEFAULT_MW_RABI_MHZ).unwrap()),
        (label("↓⇑⇑"), rotation_pulse(&cat, &nmr, FRAC_PI_2, Param::fixed(0.0), DEFAULT_RF_RABI_MHZ).unwrap()),
    ];
    for (start, pulse) in cases {
        let rho = DensityMatrix::pure(&cat, start).unwrap();
        let mut opts = RunOptions::for_catalog(&cat);
        let a = run_once(&cat, &rho, vec![Item::Pulse(pulse)], &opts).populations();
        opts.cutoff = opts.cutoff.halved();
        let b = run_once(&cat, &rho, vec![Item::Pulse(pulse)], &opts).populations();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-4, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn norm_is_preserved_over_ten_thousand_items() {
    let cat = canonical();
    let lines: Vec<Transition> = cat.transitions.clone();
    let mut items = Vec::with_capacity(10_000);
    for k in 0..10_000usize {
        let t = &lines[k % lines.len()];
        items.push(if k % 3 == 2 {
            Item::Delay { duration_us: (0.01 * (k % 7) as f64).into() }
        } else {
            Item::Pulse(Pulse {
                channel: t.channel(),
                freq_mhz: (t.freq_mhz + 0.01 * (k % 5) as f64).into(),
                phase_rad: (0.37 * k as f64).into(),
                rabi_mhz: (if t.channel() == Channel::Mw { 3.0 } else { 0.01 }).into(),
                duration_us: (0.013 * (1 + k % 11) as f64).into(),
            })
        });
    }
    let rho = DensityMatrix::pure(&cat, label("↓⇑⇓")).unwrap();
    let out = run_once(&cat, &rho, items, &RunOptions::for_catalog(&cat));
    assert!((out.trace() - 1.0).abs() < 1e-9);
    assert!((out.purity() - 1.0).abs() < 1e-9);
    assert!(out.0.hermiticity_error() < 1e-9);
}

/// Population-only model of the pumping loop: a laser empties the excited
/// manifold with per-nucleus flips, every pulse is an ideal swap of its
/// nearest line.
fn rate_oracle(cat: &TransitionCatalog, seq: &Sequence, pumping: &OpticalPumping, start: &[f64]) -> Vec<f64> {
    let mut p = start.to_vec();
    for step in seq.resolve(0.0) {
        match step {
            Step::Laser { line, duration_us } => {
                let cycles = (duration_us / pumping.cycle_us).round().max(1.0) as i32;
                let q: Vec<f64> = pumping.nuclear_flip_per_cycle.iter().map(|f| 1.0 - (1.0 - f).powi(cycles)).collect();
                let mut next = p.clone();
                for k in 0..p.len() {
                    let l = cat.label(k);
                    if l.electron_up() != line.excites_up() {
                        continue;
                    }
                    next[k] -= p[k];
                    for mask in 0..(1usize << q.len()) {
                        let mut dest = l.with_spin(0, !line.excites_up());
                        let mut w = 1.0;
                        for (n, qn) in q.iter().enumerate() {
                            if mask & (1 << n) != 0 {
                                dest = dest.flipped(n + 1);
                                w *= qn;
                            } else {
                                w *= 1.0 - qn;
                            }
                        }
                        next[cat.level(dest).unwrap()] += w * p[k];
                    }
                }
                p = next;
            }
            Step::Pulse(pulse) => {
                let t = cat
                    .transitions
                    .iter()
                    .filter(|t| t.element(pulse.channel).norm() > 1e-3)
                    .min_by(|a, b| (a.freq_mhz - pulse.freq_mhz).abs().total_cmp(&(b.freq_mhz - pulse.freq_mhz).abs()))
                    .unwrap();
                p.swap(t.lower, t.upper);
            }
            _ => {}
        }
    }
    p
}

#[test]
fn initialization_reaches_the_target() {
    let cat = canonical();
    let target = label("↓⇓⇓");
    let opts = InitOptions::default();
    let seq = initialization_sequence(&cat, target, &opts).unwrap();
    let mut run = RunOptions::for_catalog(&cat);
    run.pumping = OpticalPumping { nuclear_flip_per_cycle: vec![0.02, 0.02], cycle_us: opts.cycle_us };
    let mixed = vec![1.0 / 8.0; 8];
    let mixed_rho = DensityMatrix::from_populations(&mixed).unwrap();
    let oracle = rate_oracle(&cat, &seq, &run.pumping, &mixed)[cat.level(target).unwrap()];
    let ideal = run_once(&cat, &mixed_rho, seq.items.clone(), &run.clone().ideal_gates()).population(&cat, target).unwrap();
    assert!(oracle >= 0.99, "oracle {oracle}");
    assert!((ideal - oracle).abs() < 1e-9, "{ideal} vs {oracle}");
    let sim = run_once(&cat, &mixed_rho, seq.items.clone(), &run).population(&cat, target).unwrap();
    assert!(sim >= 0.99, "simulated {sim}");

    // Starting in the target never lowers its population.
    let pure = DensityMatrix::pure(&cat, target).unwrap();
    let again = run_once(&cat, &pure, seq.items, &run).population(&cat, target).unwrap();
    assert!(again >= sim - 1e-9 && again > 0.99, "{again}");
}

#[test]
fn initialization_into_both_nuclei_up_uses_flip_mapping() {
    let cat = canonical();
    let seq = initialization_sequence(&cat, label("↓⇑⇑"), &InitOptions::default()).unwrap();
    let has_mapping = seq.items.iter().any(|i| match i {
        Item::Pulse(p) => cat.transitions.iter().any(|t| {
            t.kind == TransitionKind::NuclearFlipping && (t.freq_mhz - p.freq_mhz.base).abs() < 1e-9
        }),
        _ => false,
    });
    assert!(has_mapping);
}

#[test]
fn strict_initialization_names_the_missing_transition() {
    let cat = canonical();
    let opts = InitOptions { require_mapping: true, ..InitOptions::default() };
    let err = initialization_sequence(&cat, label("↓⇓⇓"), &opts).unwrap_err();
    assert!(matches!(err, tcenter_core::Error::MissingTransition(_)), "{err}");
}

fn ramsey_fringe(cat: &TransitionCatalog, nuclear: &str) -> f64 {
    let tau: Vec<f64> = (0..100).map(|i| i as f64 * 0.02).collect();
    let mut spec = ExperimentSpec::electron(ExperimentKind::Ramsey, label(nuclear), tau.clone());
    spec.virtual_detuning_mhz = 5.0;
    let exp = make_experiment(cat, &spec, RunOptions::for_catalog(cat)).unwrap();
    let y: Vec<f64> = exp.run(cat).unwrap().into_iter().map(|p| p.1).collect();
    let fit = fit_ramsey(&tau, &y).unwrap();
    assert!(fit.no_decay);
    fit.freq
}

#[test]
fn virtual_detuning_sets_the_ramsey_frequency() {
    let bare = ramsey_fringe(&electron_only(), "↓");
    assert!((bare / 5.0 - 1.0).abs() < 1e-9, "{bare}");
    // Hyperfine mixing adds a weak nuclear modulation to the register fringe.
    let register = ramsey_fringe(&canonical(), "↓⇓⇓");
    assert!((register / 5.0 - 1.0).abs() < 1e-4, "{register}");
}

#[test]
fn experiment_builders_follow_conventions() {
    let cat = canonical();
    let nuc = label("↓⇓⇓");
    let build = |kind| make_experiment(&cat, &ExperimentSpec::electron(kind, nuc, vec![1.0, 2.0]), RunOptions::for_catalog(&cat)).unwrap();
    assert_eq!(build(ExperimentKind::Cpmg(1)).variants, build(ExperimentKind::HahnEcho).variants);
    let pi_count = |e: &Experiment| e.variants[0].items.iter().filter(|i| matches!(i, Item::Pulse(_))).count() - 2;
    assert_eq!(pi_count(&build(ExperimentKind::Xy8(1))), 8);
    assert_eq!(pi_count(&build(ExperimentKind::Xy8(3))), 24);
    assert_eq!(pi_count(&build(ExperimentKind::Xy4(1))), 4);

    let mut spec = ExperimentSpec::electron(ExperimentKind::Ramsey, nuc, vec![0.0, 1.0]);
    spec.virtual_detuning_mhz = 5.0;
    let ramsey = make_experiment(&cat, &spec, RunOptions::for_catalog(&cat)).unwrap();
    let Item::Pulse(last) = ramsey.variants[0].items[2] else { panic!("expected the final π/2 pulse") };
    assert!((last.phase_rad.slope.abs() - TAU * 5.0).abs() < 1e-12);
    // The two variants project onto opposite poles.
    let Item::Pulse(other) = ramsey.variants[1].items[2] else { panic!() };
    assert!(((other.phase_rad.base - last.phase_rad.base).rem_euclid(TAU) - PI).abs() < 1e-12);
}

#[test]
fn hahn_echo_refocuses_quasi_static_noise() {
    let cat = canonical();
    let tau: Vec<f64> = vec![0.0, 2.0, 5.0, 10.0, 20.0];
    let noise = DephasingNoise {
        spins: vec![SpinNoise::new(NoiseProcess::from_t2_star_ms(presets::ELECTRON_T2_STAR_US * 1e-3)), SpinNoise::default(), SpinNoise::default()],
        nuclear_correlation: 0.0,
    };
    let echo = make_experiment(&cat, &ExperimentSpec::electron(ExperimentKind::HahnEcho, label("↓⇓⇓"), tau.clone()), RunOptions::for_catalog(&cat)).unwrap();
    let quiet: Vec<f64> = echo.run(&cat).unwrap().into_iter().map(|p| p.1).collect();
    let mc = monte_carlo_decay(&echo, &cat, &noise, 400, 3, MonteCarloOptions::default()).unwrap();
    assert!((quiet[0] - 1.0).abs() < 0.05, "{}", quiet[0]);
    for (m, q) in mc.mean.iter().zip(&quiet) {
        assert!((m - q).abs() < 0.01, "{m} vs {q}");
    }
    // The Ramsey signal under the same noise has decayed by 20 μs.
    let ramsey = make_experiment(&cat, &ExperimentSpec::electron(ExperimentKind::Ramsey, label("↓⇓⇓"), vec![20.0]), RunOptions::for_catalog(&cat)).unwrap();
    let r = monte_carlo_decay(&ramsey, &cat, &noise, 400, 3, MonteCarloOptions::default()).unwrap();
    assert!(r.mean[0].abs() < 0.1);
}

#[test]
fn ideal_bell_generation_prepares_phi_minus() {
    let cat = canonical();
    let start = DensityMatrix::pure(&cat, bell_start_label(&cat)).unwrap();
    let items = bell_generation(&cat, BellState::PhiMinus, DEFAULT_RF_RABI_MHZ).unwrap();
    let out = run_once(&cat, &start, items, &RunOptions::for_catalog(&cat).ideal_gates());
    let (uu, dd) = (cat.level(label("↓⇑⇑")).unwrap(), cat.level(label("↓⇓⇓")).unwrap());
    // ⟨Φ−|ρ|Φ−⟩ with |Φ−⟩ = (|⇑⇑⟩ − |⇓⇓⟩)/√2.
    let f = 0.5 * (out.0[(uu, uu)] + out.0[(dd, dd)] - out.0[(uu, dd)] - out.0[(dd, uu)]).re;
    assert!((f - 1.0).abs() < 1e-9, "{f}");
}

fn bell_sweep(cat: &TransitionCatalog, state: BellState, delay: Param, phase1: Param, phase2: Param, sweep: Vec<f64>) -> Vec<f64> {
    let seq = bell_sequence(cat, state, delay, phase1, phase2, DEFAULT_RF_RABI_MHZ).unwrap().with_sweep("s", sweep);
    let exp = Experiment {
        initial: DensityMatrix::pure(cat, bell_start_label(cat)).unwrap(),
        variants: vec![seq],
        observable: Observable::NuclearZ(0),
        options: RunOptions::for_catalog(cat).ideal_gates(),
    };
    exp.run(cat).unwrap().into_iter().map(|p| p.1).collect()
}

#[test]
fn phase_reversal_sweep_follows_the_coherence_formula() {
    let cat = canonical();
    let theta: Vec<f64> = (0..16).map(|k| FRAC_PI_2 * k as f64 / 16.0).collect();
    // Φ−: a = −1/2, b = 0, p3 = p2 = 0.
    let y = bell_sweep(&cat, BellState::PhiMinus, Param::fixed(0.0), Param::sweep(), Param::affine(0.0, 3.0), theta.clone());
    for (t, v) in theta.iter().zip(&y) {
        assert!((v - (4.0 * t).cos()).abs() < 1e-9, "θ = {t}: {v}");
    }
}

#[test]
fn bell_ramsey_fringes_follow_the_virtual_detuning() {
    let cat = canonical();
    let omega = 0.002;
    let tau: Vec<f64> = (0..20).map(|k| 50.0 * k as f64).collect();
    let y = bell_sweep(&cat, BellState::PhiPlus, Param::sweep(), Param::fixed(0.0), Param::affine(0.0, TAU * omega), tau.clone());
    let sign = y[0].signum();
    assert!((y[0].abs() - 1.0).abs() < 1e-9);
    for (t, v) in tau.iter().zip(&y) {
        assert!((v - sign * (TAU * omega * t).cos()).abs() < 1e-6, "τ = {t}: {v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_transition_matches_generalized_rabi(rabi in 0.1..10.0f64, detuning in -5.0..5.0f64, t in 0.0..2.0f64, phase in 0.0..TAU) {
        let cat = electron_only();
        let line = cat.transitions[0];
        let rho = DensityMatrix::pure(&cat, label("↓")).unwrap();
        let mut opts = RunOptions::for_catalog(&cat);
        opts.cutoff = RwaCutoff::AbsoluteMhz(100.0);
        let out = run_once(&cat, &rho, vec![mw(line.freq_mhz + detuning, phase, rabi, t)], &opts);
        let oracle = rabi_flip(rabi * line.abs_drive(), detuning, t);
        prop_assert!((out.electron_up(&cat) - oracle).abs() < 1e-6);
    }

    #[test]
    fn pulse_propagators_are_unitary(line in 0usize..64, offset in -1.0..1.0f64, rabi in 0.001..10.0f64, t in 0.0..1.0f64, phase in 0.0..TAU) {
        let cat = transition_catalog(&presets::register(CouplingMode::Full)).unwrap();
        let tr = cat.transitions[line % cat.transitions.len()];
        let step = PulseStep { channel: tr.channel(), freq_mhz: tr.freq_mhz + offset, phase_rad: phase, rabi_mhz: rabi, duration_us: t };
        let p = pulse_propagator(&cat, &step, 0.7, &[0.0; 8], RwaCutoff::default());
        prop_assert!(p.unitary.unitarity_error() < 1e-10);
    }
}
