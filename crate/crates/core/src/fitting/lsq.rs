//! Linear and nonlinear least-squares engines shared by the fits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::FitError;
use crate::linalg::{cholesky, cholesky_solve, spd_inverse};

/// Symmetric parameter covariance, row-major `n × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance {
    pub n: usize,
    pub values: Vec<f64>,
}

impl Covariance {
    pub fn nan(n: usize) -> Self {
        Self { n, values: vec![f64::NAN; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn stderr(&self, i: usize) -> f64 {
        self.get(i, i).max(0.0).sqrt()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Covariance of `g(p)` for a linear change of variables with Jacobian `jac` (`m × n`).
    pub fn transformed(&self, jac: &[f64], m: usize) -> Self {
        let n = self.n;
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += jac[a * n + i] * self.get(i, j) * jac[b * n + j];
                    }
                }
                out[a * m + b] = s;
            }
        }
        Self { n: m, values: out }
    }
}

/// Result of a least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LsqSolution {
    pub params: Vec<f64>,
    pub covariance: Covariance,
    /// Sum of squared (weighted) residuals.
    pub ssr: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

/// Normal-equation inverse with column equilibration; `None` when rank-deficient.
fn scaled_inverse(jtj: &[f64], n: usize) -> Option<Vec<f64>> {
    let d: Vec<f64> = (0..n).map(|i| jtj[i * n + i].sqrt()).collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let scaled: Vec<f64> = (0..n * n).map(|k| jtj[k] / (d[k / n] * d[k % n])).collect();
    let inv = spd_inverse(&scaled, n)?;
    Some((0..n * n).map(|k| inv[k] / (d[k / n] * d[k % n])).collect())
}

fn weights_or_unit(weights: Option<&[f64]>, m: usize) -> Vec<f64> {
    weights.map_or_else(|| vec![1.0; m], |w| w.to_vec())
}

/// Residual variance scale: reduced χ² when no uncertainties were given.
fn covariance_scale(ssr: f64, m: usize, n: usize, weighted: bool) -> f64 {
    if weighted {
        1.0
    } else if m > n {
        ssr / (m - n) as f64
    } else {
        0.0
    }
}

/// Ordinary (or weighted, `w = 1/σ²`) linear least squares for `y ≈ X p`,
/// with `design` row-major `m × n`.
pub fn linear_least_squares(design: &[f64], n: usize, y: &[f64], weights: Option<&[f64]>) -> Result<LsqSolution, FitError> {
    let m = y.len();
    if design.len() != m * n {
        return Err(FitError::new(format!("design has {} entries, expected {}", design.len(), m * n)));
    }
    if m < n {
        return Err(FitError::new(format!("{m} points cannot determine {n} parameters")));
    }
    let w = weights_or_unit(weights, m);
    let mut jtj = vec![0.0; n * n];
    let mut jty = vec![0.0; n];
    for r in 0..m {
        let row = &design[r * n..(r + 1) * n];
        for i in 0..n {
            jty[i] += w[r] * row[i] * y[r];
            for j in 0..n {
                jtj[i * n + j] += w[r] * row[i] * row[j];
            }
        }
    }
    let inv = scaled_inverse(&jtj, n).ok_or_else(|| FitError::new("rank-deficient design matrix"))?;
    let params: Vec<f64> = (0..n).map(|i| (0..n).map(|j| inv[i * n + j] * jty[j]).sum()).collect();
    let ssr: f64 = (0..m)
        .map(|r| {
            let fit: f64 = (0..n).map(|i| design[r * n + i] * params[i]).sum();
            w[r] * (y[r] - fit) * (y[r] - fit)
        })
        .sum();
    let scale = covariance_scale(ssr, m, n, weights.is_some());
    Ok(LsqSolution {
        params,
        covariance: Covariance { n, values: inv.iter().map(|v| v * scale).collect() },
        ssr,
        rms_residual: (ssr / m as f64).sqrt(),
        iterations: 1,
    })
}

/// Model evaluated at one abscissa: returns the value and fills the gradient.
pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once the relative SSR decrease falls below this.
    pub ftol: f64,
    /// Stop once every relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 400, ftol: 1e-15, xtol: 1e-13 }
    }
}

fn ssr_of<M: Model>(model: &M, x: &[f64], y: &[f64], w: &[f64], p: &[f64], grad: &mut [f64]) -> f64 {
    x.iter().zip(y).zip(w).map(|((&xi, &yi), &wi)| {
        let r = yi - model.eval(xi, p, grad);
        wi * r * r
    }).sum()
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and analytic Jacobian.
pub fn levenberg_marquardt<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    p0: &[f64],
    options: LmOptions,
) -> Result<LsqSolution, FitError> {
    let n = model.n_params();
    let m = x.len();
    if y.len() != m || p0.len() != n {
        return Err(FitError::new("mismatched data or parameter lengths"));
    }
    if m < n {
        return Err(FitError::new(format!("{m} points cannot determine {n} parameters")));
    }
    let w = weights_or_unit(weights, m);
    let mut p = p0.to_vec();
    let mut grad = vec![0.0; n];
    let mut ssr = ssr_of(model, x, y, &w, &p, &mut grad);
    if !ssr.is_finite() {
        return Err(FitError::new("model is not finite at the initial guess"));
    }
    // Residuals at round-off level of the data count as an exact fit.
    let ssr_floor = 1e-28 * y.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    let mut converged = false;

    while iterations < options.max_iterations {
        iterations += 1;
        jtj.iter_mut().for_each(|v| *v = 0.0);
        jtr.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            let r = y[k] - model.eval(x[k], &p, &mut grad);
            for i in 0..n {
                jtr[i] += w[k] * grad[i] * r;
                for j in 0..=i {
                    jtj[i * n + j] += w[k] * grad[i] * grad[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                jtj[j * n + i] = jtj[i * n + j];
            }
        }
        if ssr <= ssr_floor || jtr.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i * n + i] += lambda * jtj[i * n + i].max(1e-300);
            }
            let Some(l) = cholesky(&a, n, 1e-300) else {
                lambda *= 10.0;
                continue;
            };
            let step = cholesky_solve(&l, n, &jtr);
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            let trial_ssr = ssr_of(model, x, y, &w, &trial, &mut grad);
            if trial_ssr.is_finite() && trial_ssr <= ssr {
                let small_step = step.iter().zip(&p).all(|(s, v)| s.abs() <= options.xtol * (v.abs() + options.xtol));
                let small_gain = ssr - trial_ssr <= options.ftol * ssr;
                p = trial;
                ssr = trial_ssr;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // No descent direction left: the current point is a minimum to working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let rms = (ssr / m as f64).sqrt();
    if !converged {
        return Err(FitError { reason: "no convergence within the iteration limit".into(), rms_residual: rms, iterations });
    }
    let mut jtj_final = vec![0.0; n * n];
    for k in 0..m {
        model.eval(x[k], &p, &mut grad);
        for i in 0..n {
            for j in 0..n {
                jtj_final[i * n + j] += w[k] * grad[i] * grad[j];
            }
        }
    }
    let scale = covariance_scale(ssr, m, n, weights.is_some());
    let covariance = scaled_inverse(&jtj_final, n)
        .map(|inv| Covariance { n, values: inv.iter().map(|v| v * scale).collect() })
        .unwrap_or_else(|| Covariance::nan(n));
    Ok(LsqSolution { params: p, covariance, ssr, rms_residual: rms, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl Model for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
            g[0] = 1.0;
            g[1] = x;
            p[0] + p[1] * x
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let design: Vec<f64> = x.iter().flat_map(|&x| [1.0, x]).collect();
        let s = linear_least_squares(&design, 2, &y, None).unwrap();
        assert!((s.params[0] - 2.0).abs() < 1e-12 && (s.params[1] + 0.5).abs() < 1e-12);
        let lm = levenberg_marquardt(&Line, &x, &y, None, &[0.0, 0.0], LmOptions::default()).unwrap();
        assert!((lm.params[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let design = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(linear_least_squares(&design, 2, &[1.0, 2.0, 3.0], None).is_err());
    }
}
