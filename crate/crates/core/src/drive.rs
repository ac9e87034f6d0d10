//! Description of the excitation field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon statistics of the excitation light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightStatistics {
    /// Laser light: fixed Rabi frequency.
    Coherent,
    /// Thermal light: the squared Rabi frequency is exponentially distributed
    /// with mean equal to the square of the nominal Rabi frequency.
    Chaotic,
}

/// A constant-amplitude interval `[start, stop)` of the drive, in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub stop: f64,
    /// Field amplitude relative to the nominal Rabi frequency.
    pub amplitude: f64,
}

/// Piecewise-constant drive envelope. Outside every segment the amplitude
/// is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    segments: Vec<Segment>,
}

impl Envelope {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.start.is_finite() && s.stop > s.start) {
                return Err(Error::param(
                    "envelope",
                    format!("segment [{}, {}) is empty or not finite at its start", s.start, s.stop),
                ));
            }
            if !(s.amplitude.is_finite() && s.amplitude >= 0.0) {
                return Err(Error::param(
                    "envelope",
                    format!("amplitude must be finite and >= 0, got {}", s.amplitude),
                ));
            }
        }
        for w in segments.windows(2) {
            if w[1].start < w[0].stop {
                return Err(Error::param(
                    "envelope",
                    "segments must be sorted and non-overlapping",
                ));
            }
        }
        Ok(Self { segments })
    }

    /// Unit amplitude for all t >= 0.
    pub fn continuous() -> Self {
        Self {
            segments: vec![Segment { start: 0.0, stop: f64::INFINITY, amplitude: 1.0 }],
        }
    }

    /// Unit-amplitude square pulse on `[start, start + width)`.
    pub fn square(start: f64, width: f64) -> Result<Self> {
        Self::new(vec![Segment { start, stop: start + width, amplitude: 1.0 }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Relative amplitude at time `t`.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        // Segments are sorted; find the last one starting at or before t.
        let idx = self.segments.partition_point(|s| s.start <= t);
        if idx == 0 {
            return 0.0;
        }
        let s = &self.segments[idx - 1];
        if t < s.stop {
            s.amplitude
        } else {
            0.0
        }
    }

    /// First segment boundary strictly after `t`, if any.
    pub fn next_edge_after(&self, t: f64) -> Option<f64> {
        self.segments
            .iter()
            .flat_map(|s| [s.start, s.stop])
            .find(|&e| e > t && e.is_finite())
    }

    /// Time of the last finite edge, i.e. where the schedule ends.
    pub fn end(&self) -> Option<f64> {
        self.segments.last().map(|s| s.stop).filter(|e| e.is_finite())
    }
}

/// Excitation field: nominal Rabi frequency, detuning, envelope and photon
/// statistics. For chaotic light `rabi` is the intensity-mean Rabi frequency
/// Ω̄, i.e. the Rabi frequency of a coherent field with equal mean intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    rabi: f64,
    detuning: f64,
    envelope: Envelope,
    statistics: LightStatistics,
}

impl DrivePulse {
    pub fn new(rabi: f64, detuning: f64, envelope: Envelope, statistics: LightStatistics) -> Result<Self> {
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(Error::param("rabi", format!("must be finite and >= 0, got {rabi}")));
        }
        if !detuning.is_finite() {
            return Err(Error::param("detuning", "must be finite"));
        }
        Ok(Self { rabi, detuning, envelope, statistics })
    }

    /// Resonant continuous-wave drive.
    pub fn continuous(rabi: f64, statistics: LightStatistics) -> Result<Self> {
        Self::new(rabi, 0.0, Envelope::continuous(), statistics)
    }

    /// Resonant square pulse starting at t = 0.
    pub fn square(rabi: f64, width: f64, statistics: LightStatistics) -> Result<Self> {
        Self::new(rabi, 0.0, Envelope::square(0.0, width)?, statistics)
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn statistics(&self) -> LightStatistics {
        self.statistics
    }

    /// Same pulse with a different nominal Rabi frequency, used when a
    /// chaotic realization fixes the instantaneous field strength.
    pub fn with_rabi(&self, rabi: f64) -> Self {
        Self { rabi, ..self.clone() }
    }

    /// Instantaneous Rabi frequency Ω(t) = Ω · a(t).
    pub fn rabi_at(&self, t: f64) -> f64 {
        self.rabi * self.envelope.amplitude_at(t)
    }

    /// Total duration of finite pulses, if the envelope ends.
    pub fn duration(&self) -> Option<f64> {
        let first = self.envelope.segments().first()?.start;
        self.envelope.end().map(|end| end - first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_lookup() {
        let env = Envelope::new(vec![
            Segment { start: 0.0, stop: 1.0, amplitude: 1.0 },
            Segment { start: 2.0, stop: 3.0, amplitude: 0.5 },
        ])
        .unwrap();
        assert_eq!(env.amplitude_at(-0.1), 0.0);
        assert_eq!(env.amplitude_at(0.0), 1.0);
        assert_eq!(env.amplitude_at(1.0), 0.0);
        assert_eq!(env.amplitude_at(2.5), 0.5);
        assert_eq!(env.amplitude_at(3.5), 0.0);
        assert_eq!(env.next_edge_after(0.5), Some(1.0));
        assert_eq!(env.next_edge_after(1.0), Some(2.0));
        assert_eq!(env.next_edge_after(3.0), None);
        assert_eq!(env.end(), Some(3.0));
    }

    #[test]
    fn envelope_rejects_overlap() {
        let r = Envelope::new(vec![
            Segment { start: 0.0, stop: 2.0, amplitude: 1.0 },
            Segment { start: 1.0, stop: 3.0, amplitude: 1.0 },
        ]);
        assert!(r.is_err());
        assert!(Envelope::square(0.0, 0.0).is_err());
    }

    #[test]
    fn pulse_validation() {
        assert!(DrivePulse::continuous(-1.0, LightStatistics::Coherent).is_err());
        let p = DrivePulse::square(7.2, 2.0, LightStatistics::Chaotic).unwrap();
        assert_eq!(p.rabi_at(1.0), 7.2);
        assert_eq!(p.rabi_at(2.0), 0.0);
        assert_eq!(p.duration(), Some(2.0));
        assert_eq!(DrivePulse::continuous(1.0, LightStatistics::Coherent).unwrap().duration(), None);
    }
}
