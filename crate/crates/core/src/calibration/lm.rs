//! Levenberg-Marquardt with central-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use super::{CalibrationError, FitResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative Jacobian step.
    pub jacobian_step: f64,
    /// Absolute lower bound on the Jacobian step, for parameters near zero.
    pub jacobian_min_step: f64,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tolerance: f64,
    /// Stop when the relative parameter step falls below this.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            jacobian_step: 1e-6,
            jacobian_min_step: 1e-8,
            cost_tolerance: 1e-14,
            step_tolerance: 1e-12,
        }
    }
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64], m: usize, opts: &LmOptions) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = (opts.jacobian_step * p[k].abs()).max(opts.jacobian_min_step);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let dn = f(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    j
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `|residuals(p)|^2` from `p0`. Uncertainties come from the
/// Jacobian covariance scaled by the reduced chi-square.
pub fn levenberg_marquardt<F>(
    residuals: F,
    p0: &[f64],
    names: &[&str],
    opts: &LmOptions,
) -> Result<FitResult, CalibrationError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    assert_eq!(names.len(), n, "one name per parameter");
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let m = r.len();
    if m <= n {
        return Err(CalibrationError::InvalidData(format!("{m} residuals for {n} parameters")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(CalibrationError::InvalidData("residuals are not finite at the starting point".into()));
    }
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        if c == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(&residuals, &p, m, opts);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        let mut improved = false;
        let mut small_step = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                small_step = delta
                    .iter()
                    .zip(&p)
                    .all(|(d, v)| d.abs() <= opts.step_tolerance * v.abs().max(1e-12));
                let rel_drop = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel_drop < opts.cost_tolerance {
                    small_step = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || small_step {
            // no downhill step exists at any damping: stationary point
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CalibrationError::FitError { iterations, best: p });
    }
    let j = jacobian(&residuals, &p, m, opts);
    let jtj = j.transpose() * &j;
    let svd = jtj.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let reduced_chi2 = c / (m - n) as f64;
    let sigmas = match jtj.try_inverse() {
        Some(cov) => (0..n).map(|k| (cov[(k, k)] * reduced_chi2).max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; n],
    };
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params: p,
        sigmas,
        residual_norm: c.sqrt(),
        reduced_chi2,
        condition_number,
        iterations,
    })
}
