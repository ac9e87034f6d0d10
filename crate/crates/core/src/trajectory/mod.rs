//! Photon time tags from quantum-jump trajectories, detector models, and the
//! start-stop coincidence correlator of a Hanbury Brown–Twiss setup.

mod correlate;
mod detector;
mod mcwf;

use serde::Serialize;

use crate::error::{Error, Result};

pub use correlate::{correlate, fit_bidirectional_exponential, BlinkingFit, CoincidenceHistogram};
pub use detector::{apply_detector, apply_detector_model, poisson_stream, DetectorModel};
pub use mcwf::{ensemble_average, simulate_tags, Blinking, TrajectoryOptions};

/// A detection event on channel 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tag {
    pub time: f64,
    pub channel: u8,
}

/// Time-sorted detection events within [0, duration].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagStream {
    tags: Vec<Tag>,
    duration: f64,
}

impl TagStream {
    pub fn new(tags: Vec<Tag>, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::param("duration", format!("must be finite and > 0, got {duration}")));
        }
        if let Some(t) = tags.iter().find(|t| !(t.time >= 0.0 && t.time <= duration) || !(t.channel == 1 || t.channel == 2)) {
            return Err(Error::param("tags", format!("tag {t:?} outside [0, {duration}] or on an unknown channel")));
        }
        if tags.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::param("tags", "must be sorted by time"));
        }
        Ok(Self { tags, duration })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn channel_times(&self, channel: u8) -> Vec<f64> {
        self.tags.iter().filter(|t| t.channel == channel).map(|t| t.time).collect()
    }

    pub fn count(&self, channel: u8) -> usize {
        self.tags.iter().filter(|t| t.channel == channel).count()
    }

    /// Detected photons per ns over both channels.
    pub fn rate(&self) -> f64 {
        self.tags.len() as f64 / self.duration
    }
}
