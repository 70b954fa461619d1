//! Named parameter sets reproducing the measured T-centre register.

use alloc::vec;
use alloc::vec::Vec;

use crate::constants::{GAMMA_H_MHZ_PER_T, GAMMA_SI29_MHZ_PER_T, G_FACTOR_T_CENTER};
use crate::noise::{sigma_from_t2_star, DephasingNoise, NoiseProcess, SpinNoise};
use crate::readout::ReadoutModel;
use crate::register::{CouplingMode, HyperfineTensor, Nucleus, RegisterConfig, Species};

/// ¹H NMR line with the electron down and ²⁹Si down, MHz.
pub const H_NMR_DOWN_MHZ: f64 = 10.005;
/// ¹H NMR line with the electron up and ²⁹Si down, MHz.
pub const H_NMR_UP_MHZ: f64 = 12.141;
/// Centre of the ²⁹Si NMR doublet with the electron down, MHz.
pub const SI_NMR_DOWN_MHZ: f64 = 5.817;
/// ²⁹Si–¹H Ising coupling, kHz.
pub const J_NN_KHZ: f64 = 2.0;
/// Transverse ²⁹Si hyperfine components, MHz.
pub const SI_A_TRANSVERSE_MHZ: f64 = 0.5;

/// Field at which the ¹H lines conditioned on ²⁹Si down sit exactly at
/// [`H_NMR_DOWN_MHZ`] and [`H_NMR_UP_MHZ`] once the `J/2` shift is included.
pub fn register_field_t() -> f64 {
    ((H_NMR_DOWN_MHZ + H_NMR_UP_MHZ) / 2.0 - J_NN_KHZ * 1e-3 / 2.0) / GAMMA_H_MHZ_PER_T
}

/// The three-qubit register: electron, ²⁹Si (spin 1), ¹H (spin 2).
pub fn register(mode: CouplingMode) -> RegisterConfig {
    let b = register_field_t();
    let a_h = -(H_NMR_UP_MHZ - H_NMR_DOWN_MHZ);
    // ²⁹Si A_zz chosen so the electron-down effective field on the nucleus
    // has magnitude SI_NMR_DOWN_MHZ including the transverse part.
    let zeeman_si = -GAMMA_SI29_MHZ_PER_T * b;
    let t = SI_A_TRANSVERSE_MHZ / 2.0;
    let a_si = 2.0 * (zeeman_si - libm::sqrt(SI_NMR_DOWN_MHZ * SI_NMR_DOWN_MHZ - 2.0 * t * t));
    RegisterConfig {
        b_field_t: b,
        g_electron: G_FACTOR_T_CENTER,
        nuclei: vec![
            Nucleus::new(Species::Silicon29, HyperfineTensor::axial(a_si, SI_A_TRANSVERSE_MHZ, SI_A_TRANSVERSE_MHZ)),
            Nucleus::new(Species::Hydrogen, HyperfineTensor::isotropic(a_h)),
        ],
        j_coupling_khz: J_NN_KHZ,
        mode,
    }
}

/// Gaussian Ramsey `T2*` of the electron, μs.
pub const ELECTRON_T2_STAR_US: f64 = 2.7;
/// Gaussian Ramsey `T2*` of ²⁹Si, ms.
pub const SI_T2_STAR_MS: f64 = 13.9;
/// Gaussian Ramsey `T2*` of ¹H, ms.
pub const H_T2_STAR_MS: f64 = 4.0;
/// Correlation time of the slow electron bath in the decoupling preset, ms.
pub const ELECTRON_BATH_TAU_C_MS: f64 = 1590.0;

/// Quasi-static noise on all three spins with the measured `T2*` values and
/// the given correlation between the two nuclear detunings.
pub fn paper_noise(correlation: f64) -> DephasingNoise {
    DephasingNoise {
        spins: vec![
            SpinNoise::new(NoiseProcess::from_t2_star_ms(ELECTRON_T2_STAR_US * 1e-3)),
            SpinNoise::new(NoiseProcess::from_t2_star_ms(SI_T2_STAR_MS)),
            SpinNoise::new(NoiseProcess::from_t2_star_ms(H_T2_STAR_MS)),
        ],
        nuclear_correlation: correlation,
    }
}

/// Slow Lorentzian (Ornstein–Uhlenbeck) bath on the electron whose variance
/// matches the measured electron `T2*`; nuclei are quiet.
pub fn electron_ou_noise() -> DephasingNoise {
    let sigma_khz = sigma_from_t2_star(ELECTRON_T2_STAR_US * 1e-3);
    DephasingNoise {
        spins: vec![
            SpinNoise::new(NoiseProcess::OrnsteinUhlenbeck { sigma_khz, tau_c_ms: ELECTRON_BATH_TAU_C_MS }),
            SpinNoise::default(),
            SpinNoise::default(),
        ],
        nuclear_correlation: 0.0,
    }
}

/// Illustrative readout parameters: the optical cyclicities are not known,
/// so these only fix plausible magnitudes.
pub fn readout() -> ReadoutModel {
    ReadoutModel {
        photons_per_cycle: 0.6,
        p_e_flip_per_cycle: 0.3,
        p_n_flip_per_cycle: 0.05,
        background_per_cycle: 0.05,
        n_repetitions: 2,
    }
}

/// Probability of the target nuclear configuration after initialisation.
pub const INIT_TARGET_POPULATION: f64 = 0.90;
/// ²⁹Si π/2 and ¹H π pulse fidelities of the entangling gates.
pub const SI_PULSE_FIDELITY: f64 = 0.89;
pub const H_PULSE_FIDELITY: f64 = 0.88;

/// Imperfect initialisation of nuclear configuration `target` (index among
/// `2^n_nuclei`): [`INIT_TARGET_POPULATION`] in the target, the rest shared
/// equally.
pub fn init_populations(n_nuclei: usize, target: usize) -> Vec<f64> {
    let n = 1usize << n_nuclei;
    let rest = (1.0 - INIT_TARGET_POPULATION) / (n - 1) as f64;
    (0..n).map(|k| if k == target { INIT_TARGET_POPULATION } else { rest }).collect()
}

/// Per-spin pulse fidelities `[electron, ²⁹Si, ¹H]`.
pub fn pulse_fidelities() -> Vec<f64> {
    vec![1.0, SI_PULSE_FIDELITY, H_PULSE_FIDELITY]
}
