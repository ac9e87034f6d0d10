//! Start-stop coincidence histogram with the C_N normalization.

use rayon::prelude::*;
use serde::Serialize;

use super::TagStream;
use crate::error::{Error, Result};
use crate::fit::levenberg_marquardt;

/// Coincidences of channel-2 tags at lag τ = t₂ − t₁ after channel-1 tags,
/// in bins of width w centered on multiples of w.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width: f64,
    pub lags: Vec<f64>,
    pub counts: Vec<u64>,
    /// C_N(τ) = c(τ)/(R₁ R₂ w T) with Rᵢ = Nᵢ/T the channel rates.
    pub c_norm: Vec<f64>,
    /// Poisson standard error of C_N.
    pub c_norm_err: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub duration: f64,
}

impl CoincidenceHistogram {
    fn normalization(&self) -> f64 {
        self.duration / (self.n1 as f64 * self.n2 as f64 * self.bin_width)
    }

    /// C_N restricted to lags with |τ| ≤ `max_abs`.
    pub fn window(&self, max_abs: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.lags
            .iter()
            .zip(&self.c_norm)
            .zip(&self.c_norm_err)
            .filter(move |((l, _), _)| l.abs() <= max_abs + 1e-9)
            .map(|((l, c), e)| (*l, *c, *e))
    }
}

const CHUNK: usize = 1 << 16;

pub fn correlate(stream: &TagStream, bin_w: f64, max_lag: f64) -> Result<CoincidenceHistogram> {
    if !(bin_w > 0.0 && bin_w.is_finite()) {
        return Err(Error::param("bin_w", format!("must be finite and > 0, got {bin_w}")));
    }
    let limit = stream.duration() / 10.0;
    if !(max_lag >= 0.0) || max_lag > limit {
        return Err(Error::LagRange { max_lag, limit });
    }
    let starts = stream.channel_times(1);
    let stops = stream.channel_times(2);
    if starts.is_empty() {
        return Err(Error::EmptyChannel(1));
    }
    if stops.is_empty() {
        return Err(Error::EmptyChannel(2));
    }
    let k_max = (max_lag / bin_w).round() as i64;
    let n_bins = (2 * k_max + 1) as usize;
    let reach = (k_max as f64 + 0.5) * bin_w;

    let partial: Vec<Vec<u64>> = starts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut hist = vec![0u64; n_bins];
            let mut lo = stops.partition_point(|&t| t < chunk[0] - reach);
            for &t1 in chunk {
                while lo < stops.len() && stops[lo] < t1 - reach {
                    lo += 1;
                }
                let mut j = lo;
                while j < stops.len() && stops[j] < t1 + reach {
                    let k = ((stops[j] - t1) / bin_w + 0.5).floor() as i64 + k_max;
                    if (0..n_bins as i64).contains(&k) {
                        hist[k as usize] += 1;
                    }
                    j += 1;
                }
            }
            hist
        })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for h in &partial {
        for (c, v) in counts.iter_mut().zip(h) {
            *c += v;
        }
    }
    let mut out = CoincidenceHistogram {
        bin_width: bin_w,
        lags: (-k_max..=k_max).map(|k| k as f64 * bin_w).collect(),
        counts,
        c_norm: Vec::new(),
        c_norm_err: Vec::new(),
        n1: starts.len(),
        n2: stops.len(),
        duration: stream.duration(),
    };
    let norm = out.normalization();
    out.c_norm = out.counts.iter().map(|&c| c as f64 * norm).collect();
    out.c_norm_err = out.counts.iter().map(|&c| (c as f64).sqrt() * norm).collect();
    Ok(out)
}

/// Fit of y₀ + A·e^{−|τ|/τ_b} to a coincidence histogram.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlinkingFit {
    pub offset: f64,
    pub amplitude: f64,
    pub tau: f64,
    pub tau_err: f64,
    pub reduced_chi2: f64,
}

/// Fits the bidirectional exponential to C_N, ignoring |τ| < `exclude` where
/// antibunching and Rabi structure dominate. Bins are weighted by their
/// Poisson errors. Slow intensity fluctuations make neighbouring bins
/// correlated, so the reported `tau_err` is inflated by √χ²_red when the
/// reduced χ² exceeds one.
pub fn fit_bidirectional_exponential(hist: &CoincidenceHistogram, exclude: f64) -> Result<BlinkingFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sig = Vec::new();
    for ((&l, &c), &e) in hist.lags.iter().zip(&hist.c_norm).zip(&hist.c_norm_err) {
        if l.abs() >= exclude && e > 0.0 {
            xs.push(l);
            ys.push(c);
            sig.push(e);
        }
    }
    if xs.len() < 8 {
        return Err(Error::param("histogram", "fewer than 8 usable bins outside the excluded window"));
    }
    let n = xs.len();
    let tail = (n / 10).max(2);
    let mut by_lag: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(x, y)| (x.abs(), *y)).collect();
    by_lag.sort_by(|a, b| a.0.total_cmp(&b.0));
    let y0 = by_lag[n - tail..].iter().map(|p| p.1).sum::<f64>() / tail as f64;
    let a0 = by_lag[..tail].iter().map(|p| p.1).sum::<f64>() / tail as f64 - y0;
    let area: f64 = by_lag.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1 - 2.0 * y0)).sum();
    let tau0 = if a0 > 0.0 && area > 0.0 { area / a0 } else { by_lag[n - 1].0 / 5.0 };
    let model = |x: f64, p: &[f64]| p[0] + p[1] * (-x.abs() / p[2].abs()).exp();
    let fit = levenberg_marquardt(model, &xs, &ys, Some(&sig), &[y0, a0, tau0])?;
    let reduced_chi2 = fit.chi2 / (n - 3) as f64;
    Ok(BlinkingFit {
        offset: fit.params[0],
        amplitude: fit.params[1],
        tau: fit.params[2].abs(),
        tau_err: fit.stderr[2] * reduced_chi2.max(1.0).sqrt(),
        reduced_chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::trajectory::{poisson_stream, Tag};

    /// Brute-force all-pairs histogram.
    fn naive(stream: &TagStream, w: f64, k_max: i64) -> Vec<u64> {
        let a = stream.channel_times(1);
        let b = stream.channel_times(2);
        let mut h = vec![0u64; (2 * k_max + 1) as usize];
        for &x in &a {
            for &y in &b {
                let k = ((y - x) / w).round() as i64;
                if k.abs() <= k_max {
                    h[(k + k_max) as usize] += 1;
                }
            }
        }
        h
    }

    #[test]
    fn matches_all_pairs() {
        let mut rng = RngStream::new(8);
        let s = poisson_stream(0.3, 2000.0, &mut rng).unwrap();
        let h = correlate(&s, 0.5, 20.0).unwrap();
        assert_eq!(h.counts, naive(&s, 0.5, 40));
        assert_eq!(h.lags.len(), 81);
        assert_eq!(h.lags[40], 0.0);
    }

    #[test]
    fn poisson_normalizes_to_one() {
        let mut rng = RngStream::new(9);
        let s = poisson_stream(0.4, 2e6, &mut rng).unwrap();
        let h = correlate(&s, 1.0, 50.0).unwrap();
        for (c, e) in h.c_norm.iter().zip(&h.c_norm_err) {
            assert!((c - 1.0).abs() < 0.02, "{c}");
            assert!(*e < 0.01);
        }
        let n = s.len() as f64;
        assert!((h.n1 as f64 - h.n2 as f64).abs() < 4.0 * n.sqrt());
    }

    #[test]
    fn guards() {
        let one = TagStream::new(vec![Tag { time: 1.0, channel: 1 }], 100.0).unwrap();
        assert!(matches!(correlate(&one, 1.0, 5.0), Err(Error::EmptyChannel(2))));
        assert!(matches!(correlate(&one, 1.0, 50.0), Err(Error::LagRange { .. })));
        assert!(correlate(&one, 0.0, 5.0).is_err());
    }

    #[test]
    fn exponential_fit_recovers_time_constant() {
        let lags: Vec<f64> = (-200..=200).map(|k| k as f64 * 10.0).collect();
        let c_norm: Vec<f64> = lags.iter().map(|l| 1.0 + 1.0 * (-l.abs() / 405.0).exp()).collect();
        let hist = CoincidenceHistogram {
            bin_width: 10.0,
            c_norm_err: vec![0.01; lags.len()],
            counts: vec![1; lags.len()],
            lags,
            c_norm,
            n1: 1,
            n2: 1,
            duration: 1.0,
        };
        let fit = fit_bidirectional_exponential(&hist, 15.0).unwrap();
        assert!((fit.tau - 405.0).abs() < 1e-4);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
    }
}
