//! Small nonlinear least-squares fits (Levenberg-Marquardt) used for the
//! correlation-time and blinking-time extractions.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// One-sigma standard errors; infinite where a parameter is not
    /// identifiable from the data.
    pub stderr: Vec<f64>,
    pub rms_residual: f64,
    pub chi2: f64,
    pub iterations: usize,
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular system.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn jacobian(model: &impl Fn(f64, &[f64]) -> f64, xs: &[f64], p: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; p.len()]; xs.len()];
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-7 * p[k].abs().max(1e-7);
        q[k] = p[k] + h;
        let up: Vec<f64> = xs.iter().map(|&x| model(x, &q)).collect();
        q[k] = p[k] - h;
        let dn: Vec<f64> = xs.iter().map(|&x| model(x, &q)).collect();
        q[k] = p[k];
        for i in 0..xs.len() {
            jac[i][k] = w[i] * (up[i] - dn[i]) / (2.0 * h);
        }
    }
    jac
}

fn chi2(model: &impl Fn(f64, &[f64]) -> f64, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(w)
        .map(|((&x, &y), &wi)| (wi * (y - model(x, p))).powi(2))
        .sum()
}

/// Levenberg-Marquardt fit of `model(x, params)` to `(xs, ys)`.
///
/// With `sigma` given, residuals are weighted by 1/σ and the covariance is
/// absolute; otherwise it is scaled by the reduced χ².
pub fn levenberg_marquardt(
    model: impl Fn(f64, &[f64]) -> f64,
    xs: &[f64],
    ys: &[f64],
    sigma: Option<&[f64]>,
    p0: &[f64],
) -> Result<FitResult> {
    const MAX_ITER: usize = 500;
    let n = xs.len();
    let m = p0.len();
    if n != ys.len() || n <= m {
        return Err(Error::param("fit data", format!("need more than {m} points with matching x/y, got {n}")));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|&si| if si > 0.0 { 1.0 / si } else { 0.0 }).collect(),
        None => vec![1.0; n],
    };

    let mut p = p0.to_vec();
    let mut cost = chi2(&model, xs, ys, &w, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITER {
        iterations += 1;
        let jac = jacobian(&model, xs, &p, &w);
        let resid: Vec<f64> = (0..n).map(|i| w[i] * (ys[i] - model(xs[i], &p))).collect();
        let mut jtj = vec![vec![0.0; m]; m];
        let mut jtr = vec![0.0; m];
        for i in 0..n {
            for a in 0..m {
                jtr[a] += jac[i][a] * resid[i];
                for b in 0..m {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut aug = jtj.clone();
            for a in 0..m {
                aug[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            if let Some(step) = solve_dense(aug, jtr.clone()) {
                let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
                let trial_cost = chi2(&model, xs, ys, &w, &trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let small_step = step
                        .iter()
                        .zip(&p)
                        .all(|(d, v)| d.abs() <= 1e-12 * v.abs().max(1e-12));
                    let small_gain = cost - trial_cost <= 1e-15 * cost.max(1e-300);
                    p = trial;
                    cost = trial_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if small_step || small_gain {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: already at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let rms_residual = (cost / n as f64).sqrt();
    if !converged {
        return Err(Error::FitNoConvergence {
            iterations,
            rms_residual,
            reason: "iteration limit reached".into(),
        });
    }

    let jac = jacobian(&model, xs, &p, &w);
    let mut jtj = vec![vec![0.0; m]; m];
    for row in &jac {
        for a in 0..m {
            for b in 0..m {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    let scale = if sigma.is_some() { 1.0 } else { cost / (n - m) as f64 };
    let stderr = (0..m)
        .map(|k| {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            match solve_dense(jtj.clone(), e) {
                Some(col) if col[k] > 0.0 => (col[k] * scale).sqrt(),
                _ => f64::INFINITY,
            }
        })
        .collect();

    Ok(FitResult { params: p, stderr, rms_residual, chi2: cost, iterations })
}
