use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};


use super::engine::{run_steps, RunOptions};
use super::sequence::{Item, LaserLine, Param, Pulse, Sequence};
use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::noise::Realization;
use crate::register::{LevelLabel, Transition, TransitionCatalog, TransitionKind, MIN_DRIVE_ELEMENT};

/// Default MW Rabi frequency for a unit drive element (90 ns π pulse), MHz.
pub const DEFAULT_MW_RABI_MHZ: f64 = 5.556;
/// Default RF Rabi frequency, MHz. Slow enough to resolve the 2 kHz
/// conditional splitting of the nuclear lines.
pub const DEFAULT_RF_RABI_MHZ: f64 = 0.0005;

/// Scalar read out of the final register state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    /// Total population with the electron up.
    ElectronUp,
    /// Population of one level.
    Population(LevelLabel),
    /// `⟨σ_z⟩` of nucleus `k` (0-based) over the electron-down manifold,
    /// normalised by that manifold's population.
    NuclearZ(usize),
}

impl Observable {
    pub fn evaluate(&self, catalog: &TransitionCatalog, state: &DensityMatrix) -> Result<f64> {
        match *self {
            Observable::ElectronUp => Ok(state.electron_up(catalog)),
            Observable::Population(label) => state.population(catalog, label),
            Observable::NuclearZ(k) => {
                let pops = state.populations();
                let (mut num, mut den) = (0.0, 0.0);
                for (i, &p) in pops.iter().enumerate() {
                    let label = catalog.label(i);
                    if label.electron_up() {
                        continue;
                    }
                    den += p;
                    num += if label.is_up(k + 1) { p } else { -p };
                }
                if den <= 0.0 {
                    return Err(Error::Estimation("no population in the electron-down manifold".into()));
                }
                Ok(num / den)
            }
        }
    }
}

/// A swept measurement: one or two sequence variants run from the same
/// initial state. With two variants the value is `obs(v0) − obs(v1)`
/// (a projection pair).
#[derive(Clone, Debug)]
pub struct Experiment {
    pub initial: DensityMatrix,
    pub variants: Vec<Sequence>,
    pub observable: Observable,
    pub options: RunOptions,
}

impl Experiment {
    pub fn sweep_values(&self) -> Vec<f64> {
        self.variants.first().map(Sequence::points).unwrap_or_default()
    }

    /// Longest variant duration at a sweep value, μs.
    pub fn duration_us(&self, sweep_value: f64) -> f64 {
        self.variants.iter().map(|v| v.duration_us(sweep_value)).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.variants.len() > 2 {
            return Err(Error::Sequence(format!("expected 1 or 2 variants, got {}", self.variants.len())));
        }
        for v in &self.variants {
            v.validate()?;
        }
        Ok(())
    }

    /// Value at one sweep point under a given noise history.
    pub fn value(&self, catalog: &TransitionCatalog, sweep_value: f64, noise: &Realization) -> Result<f64> {
        let mut out = 0.0;
        for (i, v) in self.variants.iter().enumerate() {
            let r = run_steps(&self.initial, &v.resolve(sweep_value), catalog, &self.options, noise)?;
            let x = self.observable.evaluate(catalog, &r.state)?;
            out += if i == 0 { x } else { -x };
        }
        Ok(out)
    }

    /// Noise-free `(sweep value, value)` pairs.
    pub fn run(&self, catalog: &TransitionCatalog) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let quiet = Realization::quiet(catalog.n_spins());
        self.sweep_values().into_iter().map(|s| Ok((s, self.value(catalog, s, &quiet)?))).collect()
    }
}

/// A logical rotation `exp(−iθ/2 (cos φ X + sin φ Y))` on the two levels of
/// `transition`, with `|0⟩` the level in which the addressed spin is up.
///
/// The physical carrier phase absorbs the phase of the drive element, so
/// equal logical phases give equal rotation axes on any transition.
pub fn rotation_pulse(
    catalog: &TransitionCatalog,
    transition: &Transition,
    theta: f64,
    logical_phase: Param,
    rabi_mhz: f64,
) -> Result<Pulse> {
    let channel = transition.channel();
    let d = transition.element(channel);
    if d.norm() <= MIN_DRIVE_ELEMENT {
        return Err(Error::MissingTransition(format!(
            "{} ↔ {} has no {} drive element",
            catalog.label(transition.lower),
            catalog.label(transition.upper),
            channel.name()
        )));
    }
    if !(rabi_mhz > 0.0) {
        return Err(Error::Input(format!("Rabi frequency must be positive, got {rabi_mhz} MHz")));
    }
    let (theta, extra) = if theta < 0.0 { (-theta, PI) } else { (theta, 0.0) };
    let spin = catalog.addressed_spin(transition);
    let upper_is_zero = catalog.label(transition.upper).is_up(spin);
    let delta = d.arg();
    let phase = if upper_is_zero {
        Param::affine(delta + logical_phase.base + extra, logical_phase.slope)
    } else {
        Param::affine(delta - logical_phase.base - extra, -logical_phase.slope)
    };
    Ok(Pulse {
        channel,
        freq_mhz: transition.freq_mhz.into(),
        phase_rad: phase,
        rabi_mhz: rabi_mhz.into(),
        duration_us: (theta / (TAU * rabi_mhz * d.norm())).into(),
    })
}

/// Standard single-transition measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Sweep: pulse duration (μs).
    Rabi,
    /// Sweep: free evolution (μs).
    Ramsey,
    /// Sweep: total free evolution (μs).
    HahnEcho,
    /// CPMG with `n` π pulses. Sweep: total free evolution (μs).
    Cpmg(usize),
    /// XY4 block repeated `r` times.
    Xy4(usize),
    /// XY8 block repeated `r` times.
    Xy8(usize),
    /// Sweep: RF carrier frequency (MHz).
    NmrSweep,
    /// Sweep: MW carrier frequency (MHz).
    OdmrSweep,
    /// Sweep: wait time (μs) after preparing the initial level.
    T1,
}

impl ExperimentKind {
    /// Number of π pulses and their logical phases for decoupling sequences.
    pub fn refocusing_phases(self) -> Option<Vec<f64>> {
        let (x, y) = (0.0, FRAC_PI_2);
        match self {
            ExperimentKind::HahnEcho => Some(vec![y]),
            ExperimentKind::Cpmg(n) => Some(vec![y; n]),
            ExperimentKind::Xy4(r) => Some([x, y, x, y].repeat(r)),
            ExperimentKind::Xy8(r) => Some([x, y, x, y, y, x, y, x].repeat(r)),
            _ => None,
        }
    }
}

/// Parameters of [`make_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Initial level; one end of the driven transition.
    pub initial: LevelLabel,
    /// Other end of the driven transition.
    pub partner: LevelLabel,
    pub rabi_mhz: f64,
    /// Carrier offset from the line centre, MHz.
    pub detuning_mhz: f64,
    /// Phase advance rate of the final Ramsey pulse, MHz.
    pub virtual_detuning_mhz: f64,
    pub sweep: Vec<f64>,
}

impl ExperimentSpec {
    /// Electron experiment on the nuclear-conserving ESR line of `nuclear`
    /// starting from electron down.
    pub fn electron(kind: ExperimentKind, nuclear: LevelLabel, sweep: Vec<f64>) -> Self {
        Self {
            kind,
            initial: nuclear.with_spin(0, false),
            partner: nuclear.with_spin(0, true),
            rabi_mhz: DEFAULT_MW_RABI_MHZ,
            detuning_mhz: 0.0,
            virtual_detuning_mhz: 0.0,
            sweep,
        }
    }

    /// Nuclear experiment flipping nucleus `nucleus` (0-based) from `initial`.
    pub fn nuclear(kind: ExperimentKind, initial: LevelLabel, nucleus: usize, sweep: Vec<f64>) -> Self {
        Self {
            kind,
            initial,
            partner: initial.flipped(nucleus + 1),
            rabi_mhz: DEFAULT_RF_RABI_MHZ,
            detuning_mhz: 0.0,
            virtual_detuning_mhz: 0.0,
            sweep,
        }
    }
}

/// Builds a standard experiment on one transition.
///
/// Ramsey and decoupling sequences are projection pairs: the final π/2
/// pulse is applied with phase 0 and π, and the value is the difference of
/// the partner-level populations (1 at zero delay without noise).
pub fn make_experiment(catalog: &TransitionCatalog, spec: &ExperimentSpec, options: RunOptions) -> Result<Experiment> {
    let transition = *catalog.between(spec.initial, spec.partner)?;
    let initial = DensityMatrix::pure(catalog, spec.initial)?;
    let observable = Observable::Population(spec.partner);
    let detune = |mut p: Pulse| {
        p.freq_mhz = Param::fixed(p.freq_mhz.base + spec.detuning_mhz);
        p
    };
    let rot = |theta: f64, phase: Param| rotation_pulse(catalog, &transition, theta, phase, spec.rabi_mhz).map(detune);
    let swept = |items: Vec<Item>| Sequence::new(items).with_sweep(sweep_name(spec.kind), spec.sweep.clone());

    let variants = match spec.kind {
        ExperimentKind::Rabi => {
            let mut p = rot(PI, Param::fixed(0.0))?;
            p.duration_us = Param::sweep();
            vec![swept(vec![Item::Pulse(p), Item::Read])]
        }
        ExperimentKind::NmrSweep | ExperimentKind::OdmrSweep => {
            let mut p = rot(PI, Param::fixed(0.0))?;
            p.freq_mhz = Param::sweep();
            vec![swept(vec![Item::Pulse(p), Item::Read])]
        }
        ExperimentKind::T1 => vec![swept(vec![Item::Delay { duration_us: Param::sweep() }, Item::Read])],
        ExperimentKind::Ramsey => {
            let advance = TAU * spec.virtual_detuning_mhz;
            let first = rot(FRAC_PI_2, Param::fixed(0.0))?;
            [0.0, PI]
                .iter()
                .map(|&extra| {
                    let last = rot(FRAC_PI_2, Param::affine(extra, advance))?;
                    Ok(swept(vec![
                        Item::Pulse(first),
                        Item::Delay { duration_us: Param::sweep() },
                        Item::Pulse(last),
                        Item::Read,
                    ]))
                })
                .collect::<Result<Vec<_>>>()?
        }
        kind => {
            let phases = kind.refocusing_phases().expect("decoupling kind");
            let n = phases.len();
            if n == 0 {
                return Err(Error::Input("decoupling sequence needs at least one π pulse".into()));
            }
            let half = rot(FRAC_PI_2, Param::fixed(0.0))?;
            let edge = Item::Delay { duration_us: Param::affine(0.0, 0.5 / n as f64) };
            let inner = Item::Delay { duration_us: Param::affine(0.0, 1.0 / n as f64) };
            let mut body = vec![Item::Pulse(half), edge];
            for (k, &ph) in phases.iter().enumerate() {
                body.push(Item::Pulse(rot(PI, Param::fixed(ph))?));
                body.push(if k + 1 == n { edge } else { inner });
            }
            [0.0, PI]
                .iter()
                .map(|&extra| {
                    let mut items = body.clone();
                    items.push(Item::Pulse(rot(FRAC_PI_2, Param::fixed(extra))?));
                    items.push(Item::Read);
                    Ok(swept(items))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let exp = Experiment { initial, variants, observable, options };
    exp.validate()?;
    Ok(exp)
}

fn sweep_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::NmrSweep | ExperimentKind::OdmrSweep => "freq",
        ExperimentKind::Rabi => "t",
        _ => "tau",
    }
}

/// Parameters of [`initialization_sequence`].
#[derive(Clone, Debug, PartialEq)]
pub struct InitOptions {
    pub cycles: usize,
    /// Length of each laser step, in optical cycles.
    pub laser_cycles: usize,
    /// Duration of one optical cycle, μs.
    pub cycle_us: f64,
    /// Rabi frequency of the nuclear-conserving ESR π pulses, MHz.
    pub esr_rabi_mhz: f64,
    /// Rabi frequency of the nuclear-flipping ESR π pulses, MHz.
    pub mapping_rabi_mhz: f64,
    /// Add nuclear-flipping ESR π pulses that move population directly
    /// into the target nuclear configuration.
    pub flip_mapping: bool,
    /// Fail if a nuclear-flipping line needed for the mapping is missing.
    /// Required when the laser does not flip nuclei by itself.
    pub require_mapping: bool,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            cycles: 50,
            laser_cycles: 4,
            cycle_us: 10.0,
            esr_rabi_mhz: 0.1,
            mapping_rabi_mhz: 0.1,
            flip_mapping: true,
            require_mapping: false,
        }
    }
}

/// Drive elements below this are not used for population mapping.
const MIN_MAPPING_ELEMENT: f64 = 1e-3;

/// Optical pumping into `target`, interleaved with π pulses on the
/// nuclear-conserving ESR lines of every other nuclear configuration and,
/// optionally, nuclear-flipping ESR π pulses that map neighbouring
/// configurations into the target.
pub fn initialization_sequence(catalog: &TransitionCatalog, target: LevelLabel, opts: &InitOptions) -> Result<Sequence> {
    catalog.level(target)?;
    let n_nuclei = catalog.n_spins() - 1;
    let e_up = target.electron_up();
    let line = if e_up { LaserLine::B } else { LaserLine::C };
    let laser = Item::Laser { line, duration_us: Param::fixed(opts.laser_cycles as f64 * opts.cycle_us) };
    let configs: Vec<LevelLabel> =
        (0..1usize << n_nuclei).map(|n| LevelLabel::new(catalog.n_spins(), n).with_spin(0, e_up)).collect();

    let mut block = vec![laser];
    for &c in configs.iter().filter(|c| c.nuclear_state() != target.nuclear_state()) {
        let t = catalog.esr_line(c)?;
        block.push(Item::Pulse(rotation_pulse(catalog, t, PI, Param::fixed(0.0), opts.esr_rabi_mhz)?));
    }
    block.push(laser);

    if opts.flip_mapping || opts.require_mapping {
        let mut others: Vec<LevelLabel> =
            configs.iter().copied().filter(|c| c.nuclear_state() != target.nuclear_state()).collect();
        let distance = |c: &LevelLabel| (c.nuclear_state() ^ target.nuclear_state()).count_ones();
        others.sort_by_key(|c| core::cmp::Reverse(distance(c)));
        for from in others {
            let mut mapped = false;
            let mut missing = None;
            for k in 0..n_nuclei {
                if from.is_up(k + 1) == target.is_up(k + 1) {
                    continue;
                }
                let to = from.flipped(k + 1).with_spin(0, !e_up);
                match catalog.between(from, to) {
                    Ok(t) if t.kind == TransitionKind::NuclearFlipping && t.abs_drive() > MIN_MAPPING_ELEMENT => {
                        block.push(Item::Pulse(rotation_pulse(catalog, t, PI, Param::fixed(0.0), opts.mapping_rabi_mhz)?));
                        block.push(laser);
                        mapped = true;
                        break;
                    }
                    _ => missing = missing.or(Some((from, to))),
                }
            }
            if !mapped && opts.require_mapping {
                let (a, b) = missing.expect("differs from target in at least one nucleus");
                return Err(Error::MissingTransition(format!("nuclear-flipping ESR {a} → {b} needed to reach {target}")));
            }
        }
    }

    let mut items = Vec::with_capacity(block.len() * opts.cycles);
    for _ in 0..opts.cycles {
        items.extend_from_slice(&block);
    }
    Ok(Sequence::new(items))
}

/// The four Bell states of the two nuclei.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub fn is_phi(self) -> bool {
        matches!(self, BellState::PhiPlus | BellState::PhiMinus)
    }

    pub fn name(self) -> &'static str {
        match self {
            BellState::PhiPlus => "phi-plus",
            BellState::PhiMinus => "phi-minus",
            BellState::PsiPlus => "psi-plus",
            BellState::PsiMinus => "psi-minus",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "phi-plus" | "phi+" => Some(BellState::PhiPlus),
            "phi-minus" | "phi-" => Some(BellState::PhiMinus),
            "psi-plus" | "psi+" => Some(BellState::PsiPlus),
            "psi-minus" | "psi-" => Some(BellState::PsiMinus),
            _ => None,
        }
    }

    /// Logical phase of the generating π/2 pulse.
    fn generator_phase(self) -> f64 {
        match self {
            BellState::PhiMinus | BellState::PsiPlus => 0.0,
            BellState::PhiPlus | BellState::PsiMinus => PI,
        }
    }
}

/// Start level of the Bell generation: electron down, both nuclei up.
pub fn bell_start_label(catalog: &TransitionCatalog) -> LevelLabel {
    LevelLabel::new(catalog.n_spins(), 0).with_spin(0, false)
}

/// The two nuclear transitions used for a Bell state: the ²⁹Si line
/// conditioned on ¹H up, and the ¹H line conditioned on ²⁹Si down (Φ) or
/// up (Ψ), all in the electron-down manifold.
pub fn bell_transitions(catalog: &TransitionCatalog, state: BellState) -> Result<(Transition, Transition)> {
    if catalog.n_spins() != 3 {
        return Err(Error::Input("Bell sequences need exactly two nuclei".into()));
    }
    let start = bell_start_label(catalog);
    let si = *catalog.nmr_line(start, 0)?;
    let h_from = if state.is_phi() { start.flipped(1) } else { start };
    let h = *catalog.nmr_line(h_from, 1)?;
    Ok((si, h))
}

/// Bell generation from [`bell_start_label`]: ²⁹Si π/2 then ¹H π.
pub fn bell_generation(catalog: &TransitionCatalog, state: BellState, rf_rabi_mhz: f64) -> Result<Vec<Item>> {
    let (si, h) = bell_transitions(catalog, state)?;
    Ok(vec![
        Item::Pulse(rotation_pulse(catalog, &si, FRAC_PI_2, Param::fixed(state.generator_phase()), rf_rabi_mhz)?),
        Item::Pulse(rotation_pulse(catalog, &h, PI, Param::fixed(0.0), rf_rabi_mhz)?),
    ])
}

/// Phase-shifted reversal of [`bell_generation`]: ¹H π with logical phase
/// −`phase1` (Φ) or +`phase1` (Ψ), then ²⁹Si π/2 with logical phase
/// −`phase2`, so that both sweeps depend on `phase1 + phase2`.
pub fn bell_reversal(catalog: &TransitionCatalog, state: BellState, phase1: Param, phase2: Param, rf_rabi_mhz: f64) -> Result<Vec<Item>> {
    let (si, h) = bell_transitions(catalog, state)?;
    let h_rev = if state.is_phi() { phase1.scaled(-1.0) } else { phase1 };
    Ok(vec![
        Item::Pulse(rotation_pulse(catalog, &h, PI, h_rev, rf_rabi_mhz)?),
        Item::Pulse(rotation_pulse(catalog, &si, FRAC_PI_2, phase2.scaled(-1.0), rf_rabi_mhz)?),
    ])
}

/// Bell generation, free evolution and phase-shifted reversal, followed by
/// a read. The register must already be in [`bell_start_label`].
pub fn bell_sequence(
    catalog: &TransitionCatalog,
    state: BellState,
    delay_us: Param,
    phase1: Param,
    phase2: Param,
    rf_rabi_mhz: f64,
) -> Result<Sequence> {
    let mut items = bell_generation(catalog, state, rf_rabi_mhz)?;
    items.push(Item::Delay { duration_us: delay_us });
    items.extend(bell_reversal(catalog, state, phase1, phase2, rf_rabi_mhz)?);
    items.push(Item::Read);
    Ok(Sequence::new(items))
}
