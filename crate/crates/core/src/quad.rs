//! Quadrature rules: adaptive Gauss-Kronrod on finite intervals and
//! Gauss-Laguerre for averages over exponential distributions.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod panel: (estimate, error estimate).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Nodes and weights of the 15-point Kronrod rule repeated over `panels`
/// equal panels of [a, b], in ascending node order.
pub fn composite_kronrod(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let h = 0.5 * width;
    let mut out = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * width;
        for j in 0..7 {
            out.push((c - h * XGK[j], h * WGK[j]));
        }
        out.push((c, h * WGK[7]));
        for j in (0..7).rev() {
            out.push((c + h * XGK[j], h * WGK[j]));
        }
    }
    out
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
/// Stops when the error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const MAX_PANELS: usize = 20_000;
    let mut panels = vec![(a, b, gk15(&mut f, a, b))];
    loop {
        let value: f64 = panels.iter().map(|p| p.2 .0).sum();
        let error: f64 = panels.iter().map(|p| p.2 .1).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, error, panels: panels.len() });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                reason: format!("error estimate {error:e} after {MAX_PANELS} panels on [{a}, {b}]"),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&mut f, lo, mid)));
        panels.push((mid, hi, gk15(&mut f, mid, hi)));
    }
}

/// (L_n(z), L_{n-1}(z)) by the three-term recurrence.
fn laguerre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// (L_{n-1}(z), L_n'(z)).
fn laguerre_eval(n: usize, z: f64) -> (f64, f64) {
    let (p1, p2) = laguerre_pair(n, z);
    (p2, n as f64 * (p1 - p2) / z)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL. `off[i]`
/// couples rows i and i+1; the last entry is ignored. Eigenvalues replace
/// `diag` (unsorted).
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Quadrature { reason: "tridiagonal QL did not converge".into() });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Gauss-Laguerre rule for ∫₀^∞ e^{-x} f(x) dx.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLaguerre {
    /// Highest supported order; Laguerre recurrences overflow beyond it.
    pub const MAX_ORDER: usize = 256;

    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > Self::MAX_ORDER {
            return Err(Error::param(
                "quadrature order",
                format!("must lie in 1..={}, got {order}", Self::MAX_ORDER),
            ));
        }
        let n = order;
        let nf = n as f64;
        // Nodes are the eigenvalues of the Jacobi matrix of the Laguerre
        // recurrence (diagonal 2i+1, off-diagonal i), then Newton-polished.
        let mut diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0).collect();
        let mut off: Vec<f64> = (1..=n).map(|i| if i < n { i as f64 } else { 0.0 }).collect();
        tridiagonal_eigenvalues(&mut diag, &mut off)?;
        diag.sort_by(f64::total_cmp);

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &guess in &diag {
            let mut z = guess;
            let (mut p2, mut pp) = laguerre_eval(n, z);
            for _ in 0..8 {
                let (p1, _) = laguerre_pair(n, z);
                let dz = p1 / pp;
                z -= dz;
                (p2, pp) = laguerre_eval(n, z);
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes.push(z);
            weights.push(-1.0 / (pp * nf * p2));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Quadrature {
                reason: format!("Gauss-Laguerre rule of order {n} is ill-conditioned"),
            });
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Σ wᵢ f(xᵢ), summed in node order.
    pub fn expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// (node, weight) pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_rule() {
        let rule = composite_kronrod(0.0, 2.0, 4);
        assert_eq!(rule.len(), 60);
        assert!(rule.windows(2).all(|w| w[1].0 > w[0].0));
        let sum: f64 = rule.iter().map(|(x, w)| w * x.powi(5)).sum();
        assert!((sum - 64.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn kronrod_smooth_and_peaked() {
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-14).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        // narrow Lorentzian
        let g = 1e-3;
        let r = integrate(|x| g / std::f64::consts::PI / (x * x + g * g), -1.0, 1.0, 1e-12, 1e-12).unwrap();
        let exact = 2.0 / std::f64::consts::PI * (1.0f64 / g).atan();
        assert!((r.value - exact).abs() < 1e-10);
    }

    #[test]
    fn laguerre_moments() {
        for &n in &[4usize, 16, 32, 64, 128, 256] {
            let gl = GaussLaguerre::new(n).unwrap();
            assert!(gl.nodes().windows(2).all(|w| w[1] > w[0]));
            let mut fact = 1.0;
            for k in 0..8.min(n) {
                if k > 0 {
                    fact *= k as f64;
                }
                let m = gl.expectation(|x| x.powi(k as i32));
                assert!(((m - fact) / fact).abs() < 1e-11, "n={n} k={k}: {m}");
            }
        }
        assert!(GaussLaguerre::new(0).is_err());
        assert!(GaussLaguerre::new(GaussLaguerre::MAX_ORDER + 1).is_err());
    }

    #[test]
    fn laguerre_rational_integrand_converges() {
        // ∫ e^{-x} / (1 + x) dx = e E1(1)
        let exact = 1.0f64.exp() * crate::special::exp1(1.0).unwrap();
        let err64 = (GaussLaguerre::new(64).unwrap().expectation(|x| 1.0 / (1.0 + x)) - exact).abs();
        let err128 = (GaussLaguerre::new(128).unwrap().expectation(|x| 1.0 / (1.0 + x)) - exact).abs();
        assert!(err64 < 1e-10 && err128 < 1e-10, "{err64} {err128}");
    }
}
