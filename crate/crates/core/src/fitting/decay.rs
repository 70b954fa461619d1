//! Stretched-exponential coherence decays `y = A·exp(−(t/T)ⁿ) + c`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::lsq::{levenberg_marquardt, linear_least_squares, Covariance, LmOptions, Model};
use crate::error::FitError;

/// Fitted decay. `covariance` is over `param_names`, in natural units.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    /// Decay time, in the units of the input axis.
    pub t2: f64,
    pub t2_stderr: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub stretch_n: f64,
    pub n_fixed: bool,
    pub param_names: Vec<&'static str>,
    pub covariance: Covariance,
    pub rms_residual: f64,
    /// Data carried no decay information (flat trace); `t2` is NaN.
    pub degenerate: bool,
}

/// Parameters `[A, ln T, (ln n), c]`.
struct Stretched {
    fixed_n: Option<f64>,
}

impl Model for Stretched {
    fn n_params(&self) -> usize {
        if self.fixed_n.is_some() {
            3
        } else {
            4
        }
    }

    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (a, ln_t) = (p[0], p[1]);
        let (n, c) = match self.fixed_n {
            Some(n) => (n, p[2]),
            None => (p[2].exp(), p[3]),
        };
        let u = (t.max(0.0) / ln_t.exp()).powf(n);
        let e = (-u).exp();
        g[0] = e;
        // d/d(ln T) of exp(−(t/T)^n) = n·u·e
        g[1] = a * n * u * e;
        match self.fixed_n {
            Some(_) => g[2] = 1.0,
            None => {
                let log_ratio = if t > 0.0 { (t / ln_t.exp()).ln() } else { 0.0 };
                g[2] = -a * e * u * log_ratio * n;
                g[3] = 1.0;
            }
        }
        a * e + c
    }
}

fn check_axis(t: &[f64], y: &[f64], min_points: usize) -> Result<(), FitError> {
    if t.len() != y.len() {
        return Err(FitError::new(format!("{} abscissae but {} values", t.len(), y.len())));
    }
    if t.len() < min_points {
        return Err(FitError::new(format!("need at least {min_points} points, got {}", t.len())));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::new("abscissae must be strictly increasing"));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::new("non-finite input value"));
    }
    Ok(())
}

/// Log-linearised seed `ln(−ln z) = n ln t − n ln T` on points with `z` well inside (0, 1).
fn seed(t: &[f64], y: &[f64], fixed_n: Option<f64>) -> (f64, f64, f64, f64) {
    let c0 = y[y.len() - 1];
    let a0 = y[0] - c0;
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    for (&ti, &yi) in t.iter().zip(y) {
        let z = (yi - c0) / a0;
        if ti > 0.0 && z > 0.05 && z < 0.95 {
            design.extend_from_slice(&[1.0, ti.ln()]);
            rhs.push((-z.ln()).ln());
        }
    }
    let span = t[t.len() - 1] - t[0];
    let default_n = fixed_n.unwrap_or(2.0);
    let fallback = {
        let crossing = t.iter().zip(y).find(|(_, &yi)| (yi - c0) / a0 < (-1f64).exp()).map(|(&ti, _)| ti);
        crossing.filter(|&x| x > 0.0).unwrap_or(span / 2.0)
    };
    let (t0, n0) = match fixed_n {
        Some(n) if !rhs.is_empty() => {
            // Intercept only: ln(−ln z) − n ln t = −n ln T.
            let k: f64 = rhs.iter().zip(design.chunks(2)).map(|(r, d)| r - n * d[1]).sum::<f64>() / rhs.len() as f64;
            ((-k / n).exp(), n)
        }
        None if rhs.len() >= 2 => match linear_least_squares(&design, 2, &rhs, None) {
            Ok(s) if s.params[1] > 0.0 => ((-s.params[0] / s.params[1]).exp(), s.params[1]),
            _ => (fallback, default_n),
        },
        _ => (fallback, default_n),
    };
    let t0 = if t0.is_finite() && t0 > 0.0 { t0 } else { fallback };
    (a0, t0, n0.clamp(0.2, 10.0), c0)
}

/// Fits `y = A·exp(−(t/T)ⁿ) + c`, with `n` fixed when `fix_n` is given.
pub fn fit_stretched_exp(t: &[f64], y: &[f64], fix_n: Option<f64>) -> Result<DecayFit, FitError> {
    check_axis(t, y, 5)?;
    if let Some(n) = fix_n {
        if !(n > 0.0) || !n.is_finite() {
            return Err(FitError::new(format!("fixed stretch exponent must be positive, got {n}")));
        }
    }
    let names: Vec<&'static str> =
        if fix_n.is_some() { vec!["amplitude", "t2", "offset"] } else { vec!["amplitude", "t2", "stretch_n", "offset"] };
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if hi - lo <= 1e-12 * (1.0 + hi.abs().max(lo.abs())) {
        return Ok(DecayFit {
            t2: f64::NAN,
            t2_stderr: f64::NAN,
            amplitude: 0.0,
            offset: mean,
            stretch_n: fix_n.unwrap_or(f64::NAN),
            n_fixed: fix_n.is_some(),
            covariance: Covariance::nan(names.len()),
            param_names: names,
            rms_residual: 0.0,
            degenerate: true,
        });
    }
    let (a0, t0, n0, c0) = seed(t, y, fix_n);
    let model = Stretched { fixed_n: fix_n };
    let p0: Vec<f64> = match fix_n {
        Some(_) => vec![a0, t0.ln(), c0],
        None => vec![a0, t0.ln(), n0.ln(), c0],
    };
    let sol = levenberg_marquardt(&model, t, y, None, &p0, LmOptions::default())?;
    let p = &sol.params;
    let t2 = p[1].exp();
    let (n, c) = match fix_n {
        Some(n) => (n, p[2]),
        None => (p[2].exp(), p[3]),
    };
    // Chain rule from log parameters to natural units.
    let k = names.len();
    let mut jac = vec![0.0; k * k];
    jac[0] = 1.0;
    jac[k + 1] = t2;
    if fix_n.is_some() {
        jac[2 * k + 2] = 1.0;
    } else {
        jac[2 * k + 2] = n;
        jac[3 * k + 3] = 1.0;
    }
    let covariance = sol.covariance.transformed(&jac, k);
    let degenerate = !covariance.get(1, 1).is_finite() || p[0].abs() <= 1e-12 * (hi - lo);
    Ok(DecayFit {
        t2,
        t2_stderr: covariance.stderr(1),
        amplitude: p[0],
        offset: c,
        stretch_n: n,
        n_fixed: fix_n.is_some(),
        param_names: names,
        covariance,
        rms_residual: sol.rms_residual,
        degenerate,
    })
}
