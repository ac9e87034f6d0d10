//! Exponential integral E₁ and related scaled forms.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 500;

/// Exponential integral E₁(x) = ∫₁^∞ e^{-xt}/t dt for x > 0.
///
/// Power series for x ≤ 1, Lentz continued fraction above.
pub fn exp1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::param("x", format!("E1 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        Ok(series(x))
    } else {
        Ok(continued_fraction(x) * (-x).exp())
    }
}

/// e^x E₁(x), finite for all x > 0.
pub fn exp1_scaled(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::param("x", format!("E1 requires x > 0, got {x}")));
    }
    if x <= 1.0 {
        Ok(series(x) * x.exp())
    } else {
        Ok(continued_fraction(x))
    }
}

/// 1 - y e^y E₁(y), computed without cancellation for large y.
pub fn one_minus_y_exp1_scaled(y: f64) -> Result<f64> {
    if y >= 40.0 {
        // Asymptotic series Σ_{k≥1} (-1)^{k+1} k! / y^k, truncated at the
        // smallest term.
        let mut term = 1.0 / y;
        let mut sum = term;
        for k in 2..60 {
            let next = -term * k as f64 / y;
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < EPS * sum.abs() {
                break;
            }
        }
        return Ok(sum);
    }
    Ok(1.0 - y * exp1_scaled(y)?)
}

fn series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        term *= -x / k as f64;
        let contrib = -term / k as f64;
        sum += contrib;
        if contrib.abs() < EPS * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

fn continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
