//! Detector imperfections applied to a tag stream.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::{Tag, TagStream};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-detector response. Dead time and dark counts default to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Gaussian timing jitter of each detector, FWHM [ns].
    pub jitter_fwhm: f64,
    /// Time after a registered tag during which a channel is blind [ns].
    pub dead_time: f64,
    /// Dark-count rate per channel [1/ns].
    pub dark_rate: f64,
}

impl DetectorModel {
    pub fn jitter_only(jitter_fwhm: f64) -> Self {
        Self { jitter_fwhm, dead_time: 0.0, dark_rate: 0.0 }
    }
}

fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}

/// Adds independent Gaussian jitter of FWHM `jitter_fwhm` to every tag,
/// re-sorts, and drops tags pushed outside [0, T].
pub fn apply_detector(stream: &TagStream, jitter_fwhm: f64, rng: &mut RngStream) -> Result<TagStream> {
    apply_detector_model(stream, &DetectorModel::jitter_only(jitter_fwhm), rng)
}

pub fn apply_detector_model(stream: &TagStream, model: &DetectorModel, rng: &mut RngStream) -> Result<TagStream> {
    if !(model.jitter_fwhm >= 0.0 && model.dead_time >= 0.0 && model.dark_rate >= 0.0) {
        return Err(Error::param("detector", "jitter, dead time and dark rate must be >= 0"));
    }
    let t_max = stream.duration();
    let mut tags: Vec<Tag> = stream.tags().to_vec();
    if model.dark_rate > 0.0 {
        let exp = Exp::new(model.dark_rate).expect("rate > 0");
        for channel in [1u8, 2] {
            let mut t = exp.sample(rng);
            while t < t_max {
                tags.push(Tag { time: t, channel });
                t += exp.sample(rng);
            }
        }
        tags.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    if model.jitter_fwhm > 0.0 {
        let normal = Normal::new(0.0, fwhm_to_sigma(model.jitter_fwhm)).expect("sigma > 0");
        for tag in &mut tags {
            tag.time += normal.sample(rng);
        }
        tags.retain(|t| t.time >= 0.0 && t.time <= t_max);
        tags.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
    if model.dead_time > 0.0 {
        let mut last = [f64::NEG_INFINITY; 2];
        tags.retain(|t| {
            let slot = &mut last[usize::from(t.channel - 1)];
            if t.time - *slot >= model.dead_time {
                *slot = t.time;
                true
            } else {
                false
            }
        });
    }
    TagStream::new(tags, t_max)
}

/// Homogeneous Poisson stream of total rate `rate` [1/ns] with fair channel
/// assignment.
pub fn poisson_stream(rate: f64, duration: f64, rng: &mut RngStream) -> Result<TagStream> {
    if !(rate > 0.0 && duration > 0.0) {
        return Err(Error::param("rate/duration", "must be > 0"));
    }
    let exp = Exp::new(rate).expect("rate > 0");
    let mut tags = Vec::with_capacity((rate * duration * 1.1) as usize);
    let mut t = exp.sample(rng);
    while t < duration {
        let channel = if rng.random::<bool>() { 1 } else { 2 };
        tags.push(Tag { time: t, channel });
        t += exp.sample(rng);
    }
    TagStream::new(tags, duration)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks_exponential(gaps: &mut [f64], rate: f64) -> f64 {
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        gaps.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-rate * x).exp();
                ((i + 1) as f64 / n - f).abs().max((f - i as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_jitter_is_identity() {
        let mut rng = RngStream::new(3);
        let s = poisson_stream(0.5, 1000.0, &mut rng).unwrap();
        assert_eq!(apply_detector(&s, 0.0, &mut rng).unwrap(), s);
    }

    #[test]
    fn jittered_poisson_stays_poisson() {
        let mut rng = RngStream::new(4);
        let rate = 0.2;
        let s = poisson_stream(rate, 500_000.0, &mut rng).unwrap();
        let j = apply_detector(&s, 0.351, &mut rng).unwrap();
        let times: Vec<f64> = j.tags().iter().map(|t| t.time).collect();
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(ks_exponential(&mut gaps, rate) < 0.02);
        assert!(j.tags().windows(2).all(|w| w[1].time >= w[0].time));
    }

    #[test]
    fn pair_jitter_width() {
        // two detectors with FWHM f/√2 each give a relative-delay FWHM of f
        let mut rng = RngStream::new(5);
        let per = 0.351 / 2f64.sqrt();
        let n = 200_000;
        let tags: Vec<Tag> = (0..n).map(|k| Tag { time: 10.0 + k as f64 * 50.0, channel: 1 }).collect();
        let s = TagStream::new(tags, 10.0 + n as f64 * 50.0).unwrap();
        let a = apply_detector(&s, per, &mut rng).unwrap();
        let b = apply_detector(&s, per, &mut rng).unwrap();
        let d: Vec<f64> = a.tags().iter().zip(b.tags()).map(|(x, y)| x.time - y.time).collect();
        let var = d.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let fwhm = var.sqrt() * (8.0 * std::f64::consts::LN_2).sqrt();
        assert!((fwhm / 0.351 - 1.0).abs() < 0.01, "{fwhm}");
    }

    #[test]
    fn dead_time_and_dark_counts() {
        let mut rng = RngStream::new(6);
        let empty = TagStream::new(Vec::new(), 1e6).unwrap();
        let model = DetectorModel { jitter_fwhm: 0.0, dead_time: 0.0, dark_rate: 1e-3 };
        let dark = apply_detector_model(&empty, &model, &mut rng).unwrap();
        let n = dark.len() as f64;
        assert!((n - 2000.0).abs() < 4.0 * 2000f64.sqrt());

        let s = poisson_stream(1.0, 10_000.0, &mut rng).unwrap();
        let model = DetectorModel { jitter_fwhm: 0.0, dead_time: 5.0, dark_rate: 0.0 };
        let dt = apply_detector_model(&s, &model, &mut rng).unwrap();
        for ch in [1, 2] {
            let t = dt.channel_times(ch);
            assert!(t.windows(2).all(|w| w[1] - w[0] >= 5.0));
        }
        assert!(dt.len() < s.len());
    }
}
