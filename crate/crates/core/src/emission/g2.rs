//! Emission intensity correlation g²(τ) from conditional Bloch evolution.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{sample_constant_drive, steady_state_population, BlochState};
use crate::error::{Error, Result};
use crate::lamp::LAMP_TAU_CORR;
use crate::params::TlsParams;
use crate::quad::composite_kronrod;

/// g² sampled on ascending lags [ns], symmetric about τ = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionG2 {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest lag for which the model is valid, if restricted.
    pub valid_max_lag: Option<f64>,
}

impl EmissionG2 {
    /// Linear interpolation at `tau`; `None` outside the lag range.
    pub fn value_at(&self, tau: f64) -> Option<f64> {
        let i = self.lags.partition_point(|&l| l < tau);
        if i == self.lags.len() {
            return None;
        }
        if self.lags[i] == tau {
            return Some(self.values[i]);
        }
        if i == 0 {
            return None;
        }
        let (l0, l1) = (self.lags[i - 1], self.lags[i]);
        let f = (tau - l0) / (l1 - l0);
        Some(self.values[i - 1] * (1.0 - f) + self.values[i] * f)
    }

    /// Average over the bin [center − width/2, center + width/2] of the
    /// linearly interpolated curve, as a histogram bin would record it.
    pub fn bin_average(&self, center: f64, width: f64) -> Option<f64> {
        const SUB: usize = 32;
        let h = width / SUB as f64;
        let mut acc = 0.0;
        for k in 0..=SUB {
            let v = self.value_at(center - 0.5 * width + k as f64 * h)?;
            acc += if k == 0 || k == SUB { 0.5 * v } else { v };
        }
        Some(acc / SUB as f64)
    }

    /// Mean value over lags in [lo, hi].
    pub fn window_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .lags
            .iter()
            .zip(&self.values)
            .filter(|(l, _)| **l >= lo && **l <= hi)
            .map(|(_, v)| *v)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Uniform non-negative lag grid 0, dt, …, max_lag.
pub fn lag_grid(max_lag: f64, dt: f64) -> Result<Vec<f64>> {
    if !(max_lag > 0.0 && dt > 0.0) {
        return Err(Error::param("max_lag/dt", "must be > 0"));
    }
    let n = (max_lag / dt).round() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

fn check_lags(lags: &[f64]) -> Result<()> {
    if lags.is_empty() || lags.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::param("lags", "must be non-empty, finite and >= 0"));
    }
    if lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("lags", "must be strictly ascending"));
    }
    Ok(())
}

fn symmetrize(lags: &[f64], values: &[f64], valid_max_lag: Option<f64>) -> EmissionG2 {
    let skip = usize::from(lags[0] == 0.0);
    let mut l: Vec<f64> = lags[skip..].iter().rev().map(|x| -x).collect();
    let mut v: Vec<f64> = values[skip..].iter().rev().copied().collect();
    l.extend_from_slice(lags);
    v.extend_from_slice(values);
    EmissionG2 { lags: l, values: v, valid_max_lag }
}

/// ρ11(τ) after a photon emission, i.e. starting from the ground state.
fn conditional_population(params: &TlsParams, omega: f64, detuning: f64, lags: &[f64]) -> Result<Vec<f64>> {
    Ok(sample_constant_drive(params, omega, detuning, BlochState::ground(), lags)?
        .into_iter()
        .map(|s| s.rho11)
        .collect())
}

/// g²(τ) = ρ11(τ | ground at 0)/ρ11,ss under coherent drive, returned on
/// the mirrored lag grid.
pub fn qrt_g2(params: &TlsParams, omega: f64, detuning: f64, lags: &[f64]) -> Result<EmissionG2> {
    check_lags(lags)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param("omega", "g2 needs a driven emitter, omega > 0"));
    }
    let ss = steady_state_population(params, omega, detuning);
    let values: Vec<f64> = conditional_population(params, omega, detuning, lags)?
        .into_iter()
        .map(|p| (p / ss).max(0.0))
        .collect();
    Ok(symmetrize(lags, &values, None))
}

/// Options for [`chaotic_g2`].
#[derive(Debug, Clone, Copy)]
pub struct ChaoticG2Options {
    /// Starting number of Kronrod panels, doubled until converged.
    pub panels: usize,
    /// Correlation time of the drive [ns]; lags beyond τ_corr/10 trigger a
    /// warning since the quasi-static average assumes τ ≪ τ_corr.
    pub tau_corr: f64,
}

impl Default for ChaoticG2Options {
    fn default() -> Self {
        Self { panels: 8, tau_corr: LAMP_TAU_CORR }
    }
}

/// Field amplitudes u = Ω/Ω̄ beyond this carry weight below e^{-42}.
const AMPLITUDE_CUTOFF: f64 = 6.5;
const MAX_PANELS: usize = 4096;

fn chaotic_g2_at(params: &TlsParams, mean_omega: f64, lags: &[f64], panels: usize) -> Result<Vec<f64>> {
    // Ω = Ω̄u with u Rayleigh distributed: density 2u e^{−u²}
    let rule = composite_kronrod(0.0, AMPLITUDE_CUTOFF, panels);
    let per_node: Vec<(f64, Vec<f64>)> = rule
        .into_par_iter()
        .map(|(u, w)| {
            let omega = mean_omega * u;
            let weight = w * 2.0 * u * (-u * u).exp();
            let ss = steady_state_population(params, omega, 0.0);
            if weight * ss == 0.0 {
                return Ok((0.0, vec![0.0; lags.len()]));
            }
            let cond = conditional_population(params, omega, 0.0, lags)?;
            Ok((weight * ss, cond.into_iter().map(|p| weight * ss * p).collect()))
        })
        .collect::<Result<_>>()?;
    let mean_i: f64 = per_node.iter().map(|(i, _)| i).sum();
    let mut num = vec![0.0; lags.len()];
    for (_, row) in &per_node {
        for (a, b) in num.iter_mut().zip(row) {
            *a += b;
        }
    }
    Ok(num.into_iter().map(|v| v / (mean_i * mean_i)).collect())
}

/// Emission g² under chaotic drive of mean Rabi frequency Ω̄ (rad/ns):
/// ⟨I(Ω) ρ11(τ | ground; Ω)⟩ / ⟨I(Ω)⟩² with I = ρ11,ss and
/// Ω² ~ Exponential(Ω̄²). The average runs over the field amplitude with a
/// composite Kronrod rule whose panel count doubles until successive
/// results differ by less than 1e-4 of the peak. Valid only for τ ≪ τ_corr,
/// recorded in the result.
pub fn chaotic_g2(params: &TlsParams, mean_omega: f64, lags: &[f64], opts: &ChaoticG2Options) -> Result<EmissionG2> {
    check_lags(lags)?;
    if !(mean_omega > 0.0 && mean_omega.is_finite()) {
        return Err(Error::param("mean_omega", "must be finite and > 0"));
    }
    let valid = opts.tau_corr / 10.0;
    if lags[lags.len() - 1] > valid {
        warn!("chaotic g2 requested to {} ns, beyond its validity range tau_corr/10 = {valid} ns", lags[lags.len() - 1]);
    }
    let mut n = opts.panels.max(1);
    let mut prev = chaotic_g2_at(params, mean_omega, lags, n)?;
    while 2 * n <= MAX_PANELS {
        n *= 2;
        let next = chaotic_g2_at(params, mean_omega, lags, n)?;
        let peak = next.iter().fold(0.0f64, |m, v| m.max(*v));
        let diff = next.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= 1e-4 * peak {
            let values: Vec<f64> = next.into_iter().map(|v| v.max(0.0)).collect();
            return Ok(symmetrize(lags, &values, Some(valid)));
        }
        prev = next;
    }
    Err(Error::Quadrature {
        reason: format!("chaotic g2 not converged with {MAX_PANELS} Kronrod panels"),
    })
}

/// Multiplies by the on/off telegraph factor 1 + ((1−β)/β)·e^{−|τ|/τ_b} of
/// an emitter that is bright a fraction β of the time.
pub fn blinking_envelope(g2: &EmissionG2, on_fraction: f64, tau_blink: f64) -> Result<EmissionG2> {
    if !(on_fraction > 0.0 && on_fraction <= 1.0) {
        return Err(Error::param("on_fraction", format!("must lie in (0, 1], got {on_fraction}")));
    }
    if !(tau_blink > 0.0) {
        return Err(Error::param("tau_blink", format!("must be > 0, got {tau_blink}")));
    }
    let a = (1.0 - on_fraction) / on_fraction;
    let values = g2
        .lags
        .iter()
        .zip(&g2.values)
        .map(|(l, v)| v * (1.0 + a * (-l.abs() / tau_blink).exp()))
        .collect();
    Ok(EmissionG2 { lags: g2.lags.clone(), values, valid_max_lag: g2.valid_max_lag })
}

/// Convolution with a unit-area Gaussian of FWHM `fwhm` [ns]. The lag grid
/// must be uniform with step ≤ fwhm/5; the kernel is renormalized over the
/// in-grid points near the edges.
pub fn convolve_gaussian(g2: &EmissionG2, fwhm: f64) -> Result<EmissionG2> {
    if !(fwhm >= 0.0 && fwhm.is_finite()) {
        return Err(Error::param("fwhm", format!("must be finite and >= 0, got {fwhm}")));
    }
    if fwhm == 0.0 {
        return Ok(g2.clone());
    }
    let n = g2.lags.len();
    if n < 2 {
        return Err(Error::param("g2", "need at least 2 lags"));
    }
    let dt = g2.lags[1] - g2.lags[0];
    if g2.lags.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::param("g2", "lag grid must be uniform"));
    }
    if dt > fwhm / 5.0 {
        return Err(Error::GridTooCoarse {
            reason: format!("lag step {dt} ns exceeds fwhm/5 = {} ns", fwhm / 5.0),
        });
    }
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let reach = (6.0 * sigma / dt).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| (-0.5 * (k as f64 * dt / sigma).powi(2)).exp())
        .collect();
    let values = (0..n as isize)
        .into_par_iter()
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, kv) in (-reach..=reach).zip(&kernel) {
                let idx = i - j;
                if idx >= 0 && (idx as usize) < n {
                    acc += kv * g2.values[idx as usize];
                    norm += kv;
                }
            }
            acc / norm
        })
        .collect();
    Ok(EmissionG2 { lags: g2.lags.clone(), values, valid_max_lag: g2.valid_max_lag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::local_maxima;
    use crate::params::omega_from_saturation;

    /// Weak-drive linear response on resonance. With w ≈ −1 the coherence
    /// builds up as 1 − e^{−γτ} and feeds the population, giving
    /// g²(τ) = 1 + B e^{−γτ} − (1 + B) e^{−Γτ} with B = Γ/(γ − Γ).
    fn weak_drive_linear_response(params: &TlsParams, tau: f64) -> f64 {
        let (g, c) = (params.gamma(), params.coherence_rate());
        let b = g / (c - g);
        1.0 + b * (-c * tau).exp() - (1.0 + b) * (-g * tau).exp()
    }

    #[test]
    fn antibunching_and_symmetry() {
        let params = TlsParams::paper_qd();
        let lags = lag_grid(15.0, 0.01).unwrap();
        for &omega in &[0.5, 1.7, 7.1] {
            let g = qrt_g2(&params, omega, 0.0, &lags).unwrap();
            assert_eq!(g.value_at(0.0), Some(0.0));
            assert_eq!(g.lags.len(), 2 * lags.len() - 1);
            let n = g.values.len();
            for i in 0..n {
                assert_eq!(g.values[i], g.values[n - 1 - i]);
                assert!(g.values[i] >= 0.0);
            }
            assert!((g.values[n - 1] - 1.0).abs() < 1e-4, "Ω={omega}: {}", g.values[n - 1]);
        }
    }

    #[test]
    fn weak_drive_linear_response_law() {
        let params = TlsParams::paper_qd();
        let omega = omega_from_saturation(0.01, &params);
        let lags = lag_grid(5.0 * params.t1(), 0.005).unwrap();
        let g = qrt_g2(&params, omega, 0.0, &lags).unwrap();
        for &tau in &lags {
            let want = weak_drive_linear_response(&params, tau);
            // residual O(S) corrections
            assert!((g.value_at(tau).unwrap() - want).abs() < 0.02, "τ={tau}");
        }
    }

    #[test]
    fn dephasing_dominated_limit_is_single_exponential() {
        // γ ≫ Γ: the coherence follows adiabatically and g² → 1 − e^{−τ/T1}
        let params = TlsParams::new(0.641, 0.005).unwrap();
        let omega = omega_from_saturation(0.01, &params);
        let lags = lag_grid(5.0 * params.t1(), 0.005).unwrap();
        let g = qrt_g2(&params, omega, 0.0, &lags).unwrap();
        for &tau in &lags {
            let want = 1.0 - (-tau / params.t1()).exp();
            assert!((g.value_at(tau).unwrap() - want).abs() < 0.02, "τ={tau}");
        }
    }

    #[test]
    fn strong_drive_oscillates() {
        let params = TlsParams::paper_qd();
        let lags = lag_grid(5.0, 0.005).unwrap();
        let g = qrt_g2(&params, 7.1, 0.0, &lags).unwrap();
        let pos: Vec<f64> = g.values[lags.len() - 1..].to_vec();
        assert!(local_maxima(&pos).iter().any(|&i| pos[i] > 1.0));
    }

    #[test]
    fn chaotic_plateau_and_saturation() {
        let params = TlsParams::paper_qd();
        let lags = lag_grid(10.0 * params.t1(), 0.02).unwrap();
        let weak = omega_from_saturation(0.01, &params);
        let g = chaotic_g2(&params, weak, &lags, &ChaoticG2Options::default()).unwrap();
        assert_eq!(g.value_at(0.0), Some(0.0));
        // rises through the window and settles near 2 − 4S̄
        let settled = g.value_at(10.0 * params.t1()).unwrap();
        assert!((settled - 2.0).abs() < 0.05, "{settled}");
        assert!(g.value_at(3.0 * params.t1()).unwrap() < settled);
        assert_eq!(g.valid_max_lag, Some(LAMP_TAU_CORR / 10.0));

        let strong = omega_from_saturation(1e3, &params);
        let lags = lag_grid(10.0 * params.t1(), 0.002).unwrap();
        let g = chaotic_g2(&params, strong, &lags, &ChaoticG2Options::default()).unwrap();
        let plateau = g.window_mean(3.0 * params.t1(), 10.0 * params.t1()).unwrap();
        assert!((plateau - 1.0).abs() < 0.05, "{plateau}");
    }

    #[test]
    fn chaotic_long_lag_limit_is_intensity_moment_ratio() {
        // g²(τ → ∞) = ⟨I²⟩/⟨I⟩² with I = ρ11,ss(Ω) and Ω² exponential
        let params = TlsParams::paper_qd();
        for &s_bar in &[0.01, 1.0, 30.0] {
            let mean_omega = omega_from_saturation(s_bar, &params);
            let m2 = mean_omega * mean_omega;
            let moment = |k: i32| {
                let f = |x: f64| steady_state_population(&params, (m2 * x).sqrt(), 0.0).powi(k) * (-x).exp();
                crate::quad::integrate(f, 0.0, 60.0, 1e-15, 1e-12).unwrap().value
            };
            let want = moment(2) / moment(1).powi(2);
            let lags = lag_grid(20.0, 0.01).unwrap();
            let g = chaotic_g2(&params, mean_omega, &lags, &ChaoticG2Options::default()).unwrap();
            let got = g.value_at(20.0).unwrap();
            assert!((got - want).abs() < 2e-4, "S̄={s_bar}: {got} vs {want}");
        }
    }

    #[test]
    fn blinking_factor() {
        let params = TlsParams::paper_qd();
        let lags = lag_grid(3000.0, 1.0).unwrap();
        let g = qrt_g2(&params, 1.7, 0.0, &lags).unwrap();
        assert_eq!(blinking_envelope(&g, 1.0, 405.0).unwrap(), g);
        let b = blinking_envelope(&g, 0.5, 405.0).unwrap();
        let far = b.value_at(3000.0).unwrap();
        assert!((far - 1.0).abs() < 1e-3);
        let flat = EmissionG2 { lags: vec![0.0, 1.0], values: vec![1.0, 1.0], valid_max_lag: None };
        assert_eq!(blinking_envelope(&flat, 0.5, 405.0).unwrap().values[0], 2.0);
        assert!(blinking_envelope(&g, 0.0, 405.0).is_err());
        assert!(blinking_envelope(&g, 0.5, 0.0).is_err());
    }

    #[test]
    fn gaussian_convolution() {
        let params = TlsParams::paper_qd();
        let lags = lag_grid(5.0, 0.01).unwrap();
        let ideal = EmissionG2 {
            lags: lags.iter().rev().map(|l| -l).chain(lags[1..].iter().copied()).collect(),
            values: lags
                .iter()
                .rev()
                .chain(&lags[1..])
                .map(|l| 1.0 - (-l / params.t1()).exp())
                .collect(),
            valid_max_lag: None,
        };
        let c = convolve_gaussian(&ideal, 0.351).unwrap();
        let z = c.value_at(0.0).unwrap();
        assert!(z > 0.0 && z < 0.5, "{z}");
        let n = c.values.len();
        for i in 0..n {
            assert!((c.values[i] - c.values[n - 1 - i]).abs() < 1e-12);
        }
        assert_eq!(convolve_gaussian(&ideal, 0.0).unwrap(), ideal);
        let ones = EmissionG2 { lags: ideal.lags.clone(), values: vec![1.0; n], valid_max_lag: None };
        assert!(convolve_gaussian(&ones, 0.351).unwrap().values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(matches!(convolve_gaussian(&ideal, 0.03), Err(Error::GridTooCoarse { .. })));
    }
}
