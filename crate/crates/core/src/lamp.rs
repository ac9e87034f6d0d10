//! Pseudo-thermal light source: a circular complex Gaussian field with a
//! Gaussian spectrum, and estimators for its first- and second-order
//! correlation functions.
//!
//! The source is parameterized by the correlation time τc of the fit model
//! g²(τ) = 1 + A·exp[−π(τ/τc)²], so |g¹(τ)|² = exp(−π(τ/τc)²).

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;
use crate::rng::RngStream;

/// Correlation time of the measured lamp [ns].
pub const LAMP_TAU_CORR: f64 = 901.8;

/// Sampled complex field amplitude (arbitrary units, mean intensity 1).
#[derive(Debug, Clone)]
pub struct FieldTrace {
    pub dt: f64,
    pub amplitudes: Vec<Complex64>,
}

impl FieldTrace {
    pub fn new(dt: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        if amplitudes.len() < 2 {
            return Err(Error::param("amplitudes", "need at least 2 samples"));
        }
        Ok(Self { dt, amplitudes })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len() as f64
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// A correlation function sampled at ascending lags [ns].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

/// Spectral widths implied by a Gaussian g¹ with correlation time τc, in the
/// inverse unit of τc (GHz for ns). The field spectrum is the Fourier pair of
/// g¹; the other width is the Fourier pair of |g¹|², the convention that
/// treats the intensity correlation as the line shape.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LampLinewidths {
    pub field_spectrum_fwhm: f64,
    pub intensity_correlation_fwhm: f64,
}

pub fn lamp_linewidths(tau_corr: f64) -> LampLinewidths {
    let ln2 = std::f64::consts::LN_2;
    let pi = std::f64::consts::PI;
    LampLinewidths {
        field_spectrum_fwhm: (2.0 * ln2 / pi).sqrt() / tau_corr,
        intensity_correlation_fwhm: 2.0 * (ln2 / pi).sqrt() / tau_corr,
    }
}

/// Synthesizes `n` samples of the chaotic field by filtering complex white
/// noise with the Gaussian amplitude response exp(−π f² τc²). The FFT is
/// periodic; at least 5τc of the realization is discarded so retained
/// samples never see wrap-around correlation. Mean intensity is normalized
/// to exactly 1.
pub fn synthesize_field(tau_corr: f64, dt: f64, n: usize, rng: &mut RngStream) -> Result<FieldTrace> {
    if !(tau_corr > 0.0 && dt > 0.0) {
        return Err(Error::param("tau_corr/dt", "must be > 0"));
    }
    if dt > tau_corr / 20.0 {
        return Err(Error::GridTooCoarse {
            reason: format!("dt = {dt} ns exceeds tau_corr/20 = {} ns", tau_corr / 20.0),
        });
    }
    if (n as f64) * dt < 50.0 * tau_corr {
        return Err(Error::param(
            "n",
            format!("trace of {} ns is shorter than 50*tau_corr = {} ns", n as f64 * dt, 50.0 * tau_corr),
        ));
    }
    let discard = (5.0 * tau_corr / dt).ceil() as usize;
    let len = (n + discard).next_power_of_two();

    let mut buf: Vec<Complex64> = (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let df = 1.0 / (len as f64 * dt);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 } * df;
        *v *= (-std::f64::consts::PI * f * f * tau_corr * tau_corr).exp();
    }
    planner.plan_fft_inverse(len).process(&mut buf);

    let mut amps: Vec<Complex64> = buf[discard..discard + n].to_vec();
    let mean_i = amps.iter().map(|a| a.norm_sqr()).sum::<f64>() / n as f64;
    let scale = 1.0 / mean_i.sqrt();
    for a in &mut amps {
        *a *= scale;
    }
    FieldTrace::new(dt, amps)
}

fn lag_count(trace: &FieldTrace, max_lag: f64) -> Result<usize> {
    let limit = trace.duration() / 10.0;
    if !(max_lag >= 0.0) || max_lag > limit {
        return Err(Error::LagRange { max_lag, limit });
    }
    Ok((max_lag / trace.dt + 1e-9).floor() as usize)
}

/// |g¹(τ)| via the biased estimator Σ E*(t)E(t+τ) / Σ |E|², so |g¹(0)| = 1.
pub fn estimate_g1(trace: &FieldTrace, max_lag: f64) -> Result<CorrelationCurve> {
    let k_max = lag_count(trace, max_lag)?;
    let a = &trace.amplitudes;
    let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let values: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let s: Complex64 = a[..a.len() - k].iter().zip(&a[k..]).map(|(x, y)| x.conj() * y).sum();
            if k == 0 {
                1.0
            } else {
                s.norm() / norm
            }
        })
        .collect();
    Ok(CorrelationCurve {
        lags: (0..=k_max).map(|k| k as f64 * trace.dt).collect(),
        values,
    })
}

/// g²(τ) = ⟨I(t)I(t+τ)⟩ / ⟨I⟩², with the numerator averaged over the
/// overlapping pairs at each lag.
pub fn estimate_g2(trace: &FieldTrace, max_lag: f64) -> Result<CorrelationCurve> {
    let k_max = lag_count(trace, max_lag)?;
    let inten = trace.intensities();
    let mean = inten.iter().sum::<f64>() / inten.len() as f64;
    let values: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let m = inten.len() - k;
            let s: f64 = inten[..m].iter().zip(&inten[k..]).map(|(x, y)| x * y).sum();
            s / m as f64 / (mean * mean)
        })
        .collect();
    Ok(CorrelationCurve {
        lags: (0..=k_max).map(|k| k as f64 * trace.dt).collect(),
        values,
    })
}

/// Result of fitting 1 + A·exp[−π(τ/τc)²].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianG2Fit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// NaN when not identifiable.
    pub tau_corr: f64,
    pub tau_corr_err: f64,
    /// False when the bunching amplitude is indistinguishable from zero, in
    /// which case the correlation time carries no information.
    pub tau_identifiable: bool,
    pub rms_residual: f64,
}

pub fn gaussian_g2_model(tau: f64, amplitude: f64, tau_corr: f64) -> f64 {
    1.0 + amplitude * (-std::f64::consts::PI * (tau / tau_corr).powi(2)).exp()
}

/// Least-squares fit of g²(τ) = 1 + A·exp[−π(τ/τc)²] to the non-negative
/// lags of `curve`.
pub fn fit_gaussian_g2(curve: &CorrelationCurve) -> Result<GaussianG2Fit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .lags
        .iter()
        .zip(&curve.values)
        .filter(|(l, _)| **l >= 0.0)
        .map(|(&l, &v)| (l, v))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::param("curve", "need at least 4 non-negative lags"));
    }
    let a0 = ys[0] - 1.0;
    let area: f64 = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1] - 2.0))
        .sum();
    let unidentifiable = |amp: f64, amp_err: f64, rms: f64| GaussianG2Fit {
        amplitude: amp,
        amplitude_err: amp_err,
        tau_corr: f64::NAN,
        tau_corr_err: f64::INFINITY,
        tau_identifiable: false,
        rms_residual: rms,
    };
    let flat_level = ys.iter().map(|y| y - 1.0).sum::<f64>() / ys.len() as f64;
    let flat_rms = (ys.iter().map(|y| (y - 1.0 - flat_level).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
    if a0.abs() <= 1e-12 || area / a0 <= 0.0 {
        return Ok(unidentifiable(0.0, flat_rms, flat_rms));
    }
    let tau0 = 2.0 * area / a0;
    let span = xs[xs.len() - 1];
    if span < 3.0 * tau0 {
        return Err(Error::param(
            "curve",
            format!("lags reach {span} ns, need at least 3*tau_corr ~ {} ns", 3.0 * tau0),
        ));
    }
    let fit = levenberg_marquardt(|x, p| gaussian_g2_model(x, p[0], p[1]), &xs, &ys, None, &[a0, tau0])?;
    let (amp, tau) = (fit.params[0], fit.params[1].abs());
    let (amp_err, tau_err) = (fit.stderr[0], fit.stderr[1]);
    if !(amp.abs() > 3.0 * amp_err) || !tau_err.is_finite() {
        return Ok(unidentifiable(amp, amp_err, fit.rms_residual));
    }
    Ok(GaussianG2Fit {
        amplitude: amp,
        amplitude_err: amp_err,
        tau_corr: tau,
        tau_corr_err: tau_err,
        tau_identifiable: true,
        rms_residual: fit.rms_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guards() {
        let mut rng = RngStream::new(1);
        assert!(matches!(synthesize_field(100.0, 10.0, 10_000, &mut rng), Err(Error::GridTooCoarse { .. })));
        assert!(synthesize_field(100.0, 5.0, 100, &mut rng).is_err());
        let t = FieldTrace::new(1.0, vec![Complex64::new(1.0, 0.0); 100]).unwrap();
        assert!(matches!(estimate_g1(&t, 11.0), Err(Error::LagRange { .. })));
        assert!(FieldTrace::new(1.0, vec![Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn constant_intensity_has_flat_g2() {
        let amps = (0..1000).map(|k| Complex64::from_polar(1.0, 0.01 * k as f64)).collect();
        let t = FieldTrace::new(1.0, amps).unwrap();
        let g2 = estimate_g2(&t, 100.0).unwrap();
        assert!(g2.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let g1 = estimate_g1(&t, 100.0).unwrap();
        assert_eq!(g1.values[0], 1.0);
    }

    #[test]
    fn white_noise_decorrelates() {
        let mut rng = RngStream::new(2);
        let amps: Vec<Complex64> = (0..100_000)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let t = FieldTrace::new(1.0, amps).unwrap();
        let g1 = estimate_g1(&t, 10.0).unwrap();
        assert_eq!(g1.values[0], 1.0);
        assert!(g1.values[1] < 0.1);
    }

    #[test]
    fn exact_model_fit() {
        let lags: Vec<f64> = (0..=400).map(|k| k as f64 * 10.0).collect();
        let values = lags.iter().map(|&l| gaussian_g2_model(l, 1.0, 901.8)).collect();
        let fit = fit_gaussian_g2(&CorrelationCurve { lags, values }).unwrap();
        assert!(fit.tau_identifiable);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
        assert!((fit.tau_corr - 901.8).abs() < 1e-6);
    }

    #[test]
    fn flat_curve_is_unidentifiable() {
        let lags: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let values = vec![1.0; lags.len()];
        let fit = fit_gaussian_g2(&CorrelationCurve { lags, values }).unwrap();
        assert!(fit.amplitude.abs() < 1e-9);
        assert!(!fit.tau_identifiable);
        assert!(fit.tau_corr.is_nan());
    }

    #[test]
    fn short_span_rejected() {
        let lags: Vec<f64> = (0..=20).map(|k| k as f64 * 10.0).collect();
        let values = lags.iter().map(|&l| gaussian_g2_model(l, 1.0, 901.8)).collect();
        assert!(fit_gaussian_g2(&CorrelationCurve { lags, values }).is_err());
    }

    #[test]
    fn linewidth_conventions() {
        let w = lamp_linewidths(LAMP_TAU_CORR);
        assert!((w.field_spectrum_fwhm * LAMP_TAU_CORR - 0.664).abs() < 1e-3);
        // 0.74 MHz and 1.04 MHz
        assert!((w.field_spectrum_fwhm * 1e3 - 0.7366).abs() < 1e-3);
        assert!((w.intensity_correlation_fwhm * 1e3 - 1.0417).abs() < 1e-3);
    }
}
