//! Simulation of a single resonantly driven two-level emitter under coherent
//! and chaotic (thermal) excitation.
//!
//! Units are global: times in ns, angular frequencies (Rabi frequency,
//! detuning, linewidths) in rad/ns, and ordinary frequencies in GHz. An
//! ordinary-frequency value is always the angular value divided by 2π.
//!
//! The crate is organized bottom-up:
//!
//! * [`params`] and [`drive`]: emitter parameters, instrument responses and
//!   the excitation description.
//! * [`photonstat`]: photon-number laws of the excitation light and sampling
//!   of chaotic intensities.
//! * [`bloch`]: optical Bloch integration, steady states and chaotic averages.
//! * [`lamp`]: synthetic pseudo-thermal field and its correlation functions.
//! * [`emission`]: resonance-fluorescence spectra and emission g².
//! * [`trajectory`]: quantum-jump photon time tags and the coincidence
//!   correlator.
//! * [`validate`]: cross-module oracle checks.

pub mod bloch;
pub mod drive;
pub mod emission;
mod error;
pub mod export;
pub mod fit;
pub mod lamp;
pub mod params;
pub mod photonstat;
pub mod quad;
pub mod rng;
pub mod special;
pub mod trajectory;
pub mod validate;

pub use drive::{DrivePulse, Envelope, LightStatistics, Segment};
pub use error::{Error, Result};
pub use params::{InstrumentResponse, ParameterSet, Registry, TlsParams};
pub use rng::RngStream;

/// 2π, for converting between angular (rad/ns) and ordinary (GHz) frequency.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Converts an angular frequency in rad/ns to an ordinary frequency in GHz.
#[inline]
pub fn to_ghz(angular: f64) -> f64 {
    angular / TWO_PI
}

/// Converts an ordinary frequency in GHz to an angular frequency in rad/ns.
#[inline]
pub fn to_angular(ghz: f64) -> f64 {
    ghz * TWO_PI
}
