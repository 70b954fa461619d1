use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64 as C64;

use super::sequence::PulseStep;
use crate::linalg::{evolution_operator, CMatrix};
use crate::register::{Channel, TransitionCatalog, MIN_DRIVE_ELEMENT};

/// Which transitions a pulse is allowed to drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RwaCutoff {
    /// Transitions detuned by less than this multiple of the pulse Rabi frequency.
    RabiMultiple(f64),
    /// Transitions detuned by less than a fixed frequency, MHz.
    AbsoluteMhz(f64),
}

impl Default for RwaCutoff {
    fn default() -> Self {
        RwaCutoff::RabiMultiple(50.0)
    }
}

impl RwaCutoff {
    /// Only exactly resonant transitions: ideal selective gates.
    pub const IDEAL: RwaCutoff = RwaCutoff::AbsoluteMhz(1e-9);

    pub fn width_mhz(self, rabi_mhz: f64) -> f64 {
        match self {
            RwaCutoff::RabiMultiple(k) => k * rabi_mhz,
            RwaCutoff::AbsoluteMhz(w) => w,
        }
    }

    pub fn halved(self) -> Self {
        match self {
            RwaCutoff::RabiMultiple(k) => RwaCutoff::RabiMultiple(k / 2.0),
            RwaCutoff::AbsoluteMhz(w) => RwaCutoff::AbsoluteMhz(w / 2.0),
        }
    }
}

/// Rotating-frame bookkeeping of one pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub channel: Channel,
    pub t_start_us: f64,
    pub t_end_us: f64,
    /// Source phase `2π f t_end + φ` reduced to `[0, 2π)`.
    pub source_phase_end_rad: f64,
    /// Frame frequency assigned to each level, MHz.
    pub level_frames_mhz: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropagatorWarnings {
    /// No transition fell inside the cutoff; the pulse acted as a delay.
    pub no_resonant_transition: bool,
    /// A driven loop had inconsistent frame frequencies; the closing edge was dropped.
    pub frame_conflict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    /// Interaction-picture unitary in the level basis.
    pub unitary: CMatrix,
    pub frame: FrameRecord,
    pub warnings: PropagatorWarnings,
    /// Index into the catalog transitions of the driven line nearest the carrier.
    pub target: Option<usize>,
}

/// Propagator of one rectangular pulse in the interaction picture of the
/// static Hamiltonian, within the rotating-wave approximation.
///
/// `level_offsets_mhz` are extra diagonal shifts (noise) held constant over
/// the pulse. Levels connected by near-resonant transitions are grouped and
/// each group is exponentiated in its own rotating frame.
pub fn pulse_propagator(
    catalog: &TransitionCatalog,
    pulse: &PulseStep,
    t_start_us: f64,
    level_offsets_mhz: &[f64],
    cutoff: RwaCutoff,
) -> Propagator {
    let n = catalog.dim();
    let energies = catalog.energies();
    let width = cutoff.width_mhz(pulse.rabi_mhz);
    let t_end = t_start_us + pulse.duration_us;

    // Near-resonant edges (lower, upper, element) and the line nearest the carrier.
    let mut edges = Vec::new();
    let mut target: Option<(usize, f64)> = None;
    for (idx, t) in catalog.transitions.iter().enumerate() {
        let d = t.element(pulse.channel);
        let detuning = (t.freq_mhz - pulse.freq_mhz).abs();
        if d.norm() <= MIN_DRIVE_ELEMENT || detuning >= width {
            continue;
        }
        edges.push((t.lower, t.upper, d));
        if target.map_or(true, |(_, best)| detuning < best) {
            target = Some((idx, detuning));
        }
    }

    let mut warnings = PropagatorWarnings { no_resonant_transition: edges.is_empty(), ..Default::default() };

    // Frame frequencies by breadth-first search over each connected component.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(lo, hi, _)) in edges.iter().enumerate() {
        adjacency[lo].push(e);
        adjacency[hi].push(e);
    }
    let mut frame: Vec<Option<f64>> = vec![None; n];
    let mut component = vec![usize::MAX; n];
    let mut used = vec![false; edges.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if frame[root].is_some() {
            continue;
        }
        frame[root] = Some(energies[root]);
        component[root] = groups.len();
        let mut members = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(k) = queue.pop_front() {
            for &e in &adjacency[k] {
                let (lo, hi, _) = edges[e];
                let (other, nu) = if k == lo {
                    (hi, frame[lo].unwrap() + pulse.freq_mhz)
                } else {
                    (lo, frame[hi].unwrap() - pulse.freq_mhz)
                };
                match frame[other] {
                    None => {
                        frame[other] = Some(nu);
                        component[other] = groups.len();
                        members.push(other);
                        queue.push_back(other);
                        used[e] = true;
                    }
                    Some(existing) => {
                        if (existing - nu).abs() <= 1e-9 * (1.0 + nu.abs()) {
                            used[e] = true;
                        } else if !used[e] {
                            warnings.frame_conflict = true;
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    let frames: Vec<f64> = frame.into_iter().map(|f| f.unwrap()).collect();

    let mut unitary = CMatrix::zeros(n);
    let half = pulse.rabi_mhz / 2.0;
    let drive_phase = C64::from_polar(1.0, -pulse.phase_rad);
    for members in &groups {
        let m = members.len();
        let local = |k: usize| members.binary_search(&k).unwrap();
        let mut h = CMatrix::zeros(m);
        for (a, &k) in members.iter().enumerate() {
            h[(a, a)] = C64::new(energies[k] + level_offsets_mhz[k] - frames[k], 0.0);
        }
        for (e, &(lo, hi, d)) in edges.iter().enumerate() {
            if !used[e] || component[lo] != component[members[0]] {
                continue;
            }
            let c = d * drive_phase * half;
            let (a, b) = (local(hi), local(lo));
            h[(a, b)] += c;
            h[(b, a)] += c.conj();
        }
        let u = if m == 1 {
            CMatrix::from_diag(&[C64::from_polar(1.0, -TAU * h[(0, 0)].re * pulse.duration_us)])
        } else {
            evolution_operator(&h, pulse.duration_us)
        };
        for (a, &i) in members.iter().enumerate() {
            let di = C64::from_polar(1.0, TAU * (energies[i] - frames[i]) * t_end);
            for (b, &j) in members.iter().enumerate() {
                let dj = C64::from_polar(1.0, -TAU * (energies[j] - frames[j]) * t_start_us);
                unitary[(i, j)] = di * u[(a, b)] * dj;
            }
        }
    }

    let mut source = (TAU * pulse.freq_mhz * t_end + pulse.phase_rad) % TAU;
    if source < 0.0 {
        source += TAU;
    }
    Propagator {
        unitary,
        frame: FrameRecord {
            channel: pulse.channel,
            t_start_us,
            t_end_us: t_end,
            source_phase_end_rad: source,
            level_frames_mhz: frames,
        },
        warnings,
        target: target.map(|(idx, _)| idx),
    }
}
