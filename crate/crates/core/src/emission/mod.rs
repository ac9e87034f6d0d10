//! Resonance fluorescence: emission spectra, emission g²(τ), their chaotic
//! averages, and instrument-response convolutions.

mod g2;
mod spectrum;

pub use g2::{
    blinking_envelope, chaotic_g2, convolve_gaussian, lag_grid, qrt_g2, ChaoticG2Options, EmissionG2,
};
pub use spectrum::{
    chaotic_spectrum, convolve_lorentzian, line_spectrum, qrt_spectrum, ChaoticSpectrum, CoherentLine,
    FrequencyGrid, Spectrum,
};
