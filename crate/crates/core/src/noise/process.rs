use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Classical frequency noise on one spin.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum NoiseProcess {
    #[default]
    Off,
    /// One Gaussian detuning per trajectory with standard deviation `sigma_khz`.
    QuasiStatic { sigma_khz: f64 },
    /// Stationary Ornstein–Uhlenbeck detuning.
    OrnsteinUhlenbeck { sigma_khz: f64, tau_c_ms: f64 },
}

impl NoiseProcess {
    /// Quasi-static noise giving a Gaussian Ramsey decay `exp(−(t/T2*)²)`.
    pub fn from_t2_star_ms(t2_star_ms: f64) -> Self {
        NoiseProcess::QuasiStatic { sigma_khz: sigma_from_t2_star(t2_star_ms) }
    }

    pub fn sigma_khz(&self) -> f64 {
        match *self {
            NoiseProcess::Off => 0.0,
            NoiseProcess::QuasiStatic { sigma_khz } | NoiseProcess::OrnsteinUhlenbeck { sigma_khz, .. } => sigma_khz,
        }
    }

    pub fn is_off(&self) -> bool {
        self.sigma_khz() == 0.0
    }
}

/// `σ = √2 / (2π T2*)`, kHz for `T2*` in ms.
pub fn sigma_from_t2_star(t2_star_ms: f64) -> f64 {
    2f64.sqrt() / (2.0 * PI * t2_star_ms)
}

/// Inverse of [`sigma_from_t2_star`].
pub fn t2_star_from_sigma(sigma_khz: f64) -> f64 {
    2f64.sqrt() / (2.0 * PI * sigma_khz)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SpinNoise {
    pub process: NoiseProcess,
    /// Longitudinal relaxation time, ms. `None` disables bit flips.
    pub t1_ms: Option<f64>,
}

impl SpinNoise {
    pub fn new(process: NoiseProcess) -> Self {
        Self { process, t1_ms: None }
    }
}

/// Noise model for the whole register, one entry per spin (electron first).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DephasingNoise {
    pub spins: Vec<SpinNoise>,
    /// Correlation coefficient between the detunings of the first two nuclei.
    pub nuclear_correlation: f64,
}

impl DephasingNoise {
    pub fn quiet(n_spins: usize) -> Self {
        Self { spins: vec![SpinNoise::default(); n_spins], nuclear_correlation: 0.0 }
    }

    pub fn validate(&self, n_spins: usize) -> Result<()> {
        if self.spins.len() != n_spins {
            return Err(Error::Noise(format!("expected {n_spins} spin entries, got {}", self.spins.len())));
        }
        for (s, spin) in self.spins.iter().enumerate() {
            match spin.process {
                NoiseProcess::Off => {}
                NoiseProcess::QuasiStatic { sigma_khz } => check_sigma(s, sigma_khz)?,
                NoiseProcess::OrnsteinUhlenbeck { sigma_khz, tau_c_ms } => {
                    check_sigma(s, sigma_khz)?;
                    if !(tau_c_ms > 0.0) || !tau_c_ms.is_finite() {
                        return Err(Error::Noise(format!("spin {s}: correlation time must be positive, got {tau_c_ms} ms")));
                    }
                }
            }
            if let Some(t1) = spin.t1_ms {
                if !(t1 > 0.0) {
                    return Err(Error::Noise(format!("spin {s}: T1 must be positive, got {t1} ms")));
                }
            }
        }
        let c = self.nuclear_correlation;
        if !c.is_finite() || c.abs() > 1.0 {
            return Err(Error::Noise(format!("correlation coefficient {c} outside [-1, 1]")));
        }
        Ok(())
    }

    /// Shortest correlation time among the OU processes, μs.
    pub fn shortest_correlation_time_us(&self) -> Option<f64> {
        self.spins
            .iter()
            .filter_map(|s| match s.process {
                NoiseProcess::OrnsteinUhlenbeck { tau_c_ms, .. } => Some(tau_c_ms * 1e3),
                _ => None,
            })
            .reduce(f64::min)
    }

    pub fn has_time_dependence(&self) -> bool {
        self.spins.iter().any(|s| matches!(s.process, NoiseProcess::OrnsteinUhlenbeck { .. }))
    }
}

fn check_sigma(spin: usize, sigma_khz: f64) -> Result<()> {
    if !(sigma_khz >= 0.0) || !sigma_khz.is_finite() {
        return Err(Error::Noise(format!("spin {spin}: sigma must be finite and non-negative, got {sigma_khz} kHz")));
    }
    Ok(())
}

/// Draws one standard-normal innovation per spin, correlating the first two
/// nuclei through the Cholesky factor of `[[1, c], [c, 1]]`.
fn correlated_normals<R: Rng + ?Sized>(n_spins: usize, c: f64, rng: &mut R) -> Vec<f64> {
    let mut xi: Vec<f64> = (0..n_spins).map(|_| rng.sample(StandardNormal)).collect();
    if n_spins >= 3 {
        xi[2] = c * xi[1] + (1.0 - c * c).max(0.0).sqrt() * xi[2];
    }
    xi
}

/// Samples every spin's detuning (kHz) at `t_k = k·dt`, `k = 0..=ceil(total/dt)`.
///
/// OU processes start from the stationary distribution and use the exact
/// discretisation `x' = x e^{−dt/τ} + σ √(1 − e^{−2dt/τ}) ξ`.
pub fn sample_detuning_series<R: Rng + ?Sized>(
    noise: &DephasingNoise,
    dt_us: f64,
    total_us: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    noise.validate(noise.spins.len())?;
    if !(dt_us > 0.0) || !(total_us >= 0.0) {
        return Err(Error::Noise(format!("need dt > 0 and total >= 0, got dt = {dt_us}, total = {total_us}")));
    }
    let n_steps = (total_us / dt_us).ceil() as usize;
    let n_spins = noise.spins.len();
    let c = noise.nuclear_correlation;
    let mut series: Vec<Vec<f64>> = (0..n_spins).map(|_| Vec::with_capacity(n_steps + 1)).collect();

    let xi = correlated_normals(n_spins, c, rng);
    for (s, spin) in noise.spins.iter().enumerate() {
        series[s].push(spin.process.sigma_khz() * xi[s]);
    }
    let decay: Vec<f64> = noise
        .spins
        .iter()
        .map(|s| match s.process {
            NoiseProcess::OrnsteinUhlenbeck { tau_c_ms, .. } => (-dt_us / (tau_c_ms * 1e3)).exp(),
            _ => 1.0,
        })
        .collect();
    for _ in 0..n_steps {
        let xi = correlated_normals(n_spins, c, rng);
        for (s, spin) in noise.spins.iter().enumerate() {
            let prev = *series[s].last().unwrap();
            let next = match spin.process {
                NoiseProcess::OrnsteinUhlenbeck { sigma_khz, .. } => {
                    let a = decay[s];
                    prev * a + sigma_khz * (1.0 - a * a).sqrt() * xi[s]
                }
                _ => prev,
            };
            series[s].push(next);
        }
    }
    Ok(series)
}
