//! Power-law and geometric fits: decoupling scaling and π-pulse fidelity.

use alloc::format;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::lsq::{linear_least_squares, Covariance};
use crate::error::FitError;

/// `T_coh(N) = α·Nⁿ`; `covariance` is over `[alpha, exponent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub prefactor: f64,
    pub covariance: Covariance,
}

/// Linear least squares of `ln T` against `ln N`.
pub fn fit_dd_scaling(pairs: &[(f64, f64)]) -> Result<ScalingFit, FitError> {
    if pairs.len() < 3 {
        return Err(FitError::new(format!("need at least 3 (N, T) pairs, got {}", pairs.len())));
    }
    for &(n, t) in pairs {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(FitError::new(format!("pulse count must be >= 1, got {n}")));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(FitError::new(format!("coherence time must be positive, got {t}")));
        }
    }
    let design: Vec<f64> = pairs.iter().flat_map(|&(n, _)| [1.0, n.ln()]).collect();
    let rhs: Vec<f64> = pairs.iter().map(|&(_, t)| t.ln()).collect();
    let sol = linear_least_squares(&design, 2, &rhs, None)?;
    let alpha = sol.params[0].exp();
    let jac = [alpha, 0.0, 0.0, 1.0];
    let covariance = sol.covariance.transformed(&jac, 2);
    Ok(ScalingFit { exponent: sol.params[1], exponent_stderr: covariance.stderr(1), prefactor: alpha, covariance })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiFidelity {
    pub fidelity: f64,
    /// NaN when a single pair leaves no residual degrees of freedom.
    pub stderr: f64,
}

/// Per-pulse fidelity `f` from normalised amplitudes `A(N) = f^N`
/// (uncorrelated pulse errors), fitted as `ln A = N ln f` through the origin.
pub fn estimate_pi_fidelity(pairs: &[(f64, f64)]) -> Result<PiFidelity, FitError> {
    if pairs.is_empty() {
        return Err(FitError::new("need at least one (N, amplitude) pair"));
    }
    for &(n, a) in pairs {
        if !(a > 0.0) || !a.is_finite() {
            return Err(FitError::new(format!("amplitude must be positive, got {a}")));
        }
        if !(n > 0.0) || !n.is_finite() {
            return Err(FitError::new(format!("pulse count must be positive, got {n}")));
        }
    }
    let snn: f64 = pairs.iter().map(|&(n, _)| n * n).sum();
    let sna: f64 = pairs.iter().map(|&(n, a)| n * a.ln()).sum();
    let ln_f = sna / snn;
    let f = ln_f.exp();
    let stderr = if pairs.len() > 1 {
        let ssr: f64 = pairs.iter().map(|&(n, a)| (a.ln() - n * ln_f).powi(2)).sum();
        let var = ssr / (pairs.len() - 1) as f64 / snn;
        f * var.sqrt()
    } else {
        f64::NAN
    };
    Ok(PiFidelity { fidelity: f, stderr })
}
