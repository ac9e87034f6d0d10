//! Resonance-fluorescence spectra from the quantum regression theorem.
//!
//! The regression vector X = (⟨σ₋⟩, ⟨σ₊⟩, ρ11) obeys dX/dτ = M X + b, and
//! the mean-subtracted correlation Y(τ) = ⟨σ₊(τ)σ₋⟩ − |⟨σ₋⟩|² is the second
//! component of e^{Mτ} Y₀. Its one-sided Laplace transform (s − M)⁻¹ Y₀ is
//! evaluated directly at s = iω + h, which is exact on any grid, and a
//! Lorentzian convolution of HWHM h̃ is a shift h → h + h̃ of the abscissa.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::steady_state;
use crate::error::{Error, Result};
use crate::params::TlsParams;
use crate::quad::GaussLaguerre;
use crate::{to_angular, to_ghz};

type C = Complex64;
type Mat3 = [[C; 3]; 3];

/// Uniform grid of ordinary frequencies [GHz] relative to the emitter
/// frequency ν₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) || len < 3 {
            return Err(Error::param("frequency grid", "need step > 0 and at least 3 points"));
        }
        Ok(Self { start, step, len })
    }

    /// Grid symmetric about ν₀ with a point at 0, covering ±half_span.
    pub fn symmetric(half_span: f64, step: f64) -> Result<Self> {
        if !(half_span > 0.0 && step > 0.0) {
            return Err(Error::param("frequency grid", "half_span and step must be > 0"));
        }
        let k = (half_span / step).round() as usize;
        Self::new(-(k as f64) * step, step, 2 * k + 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn freq(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.freq(i)).collect()
    }

    pub fn span(&self) -> f64 {
        self.step * (self.len - 1) as f64
    }
}

/// One incoherent contribution 2Γ·weight·Re[(s − M)⁻¹ Y₀]₂.
#[derive(Debug, Clone)]
struct Term {
    weight: f64,
    m: Mat3,
    y0: [C; 3],
}

/// Coherently scattered line at `freq` [GHz] with integrated power `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentLine {
    pub freq: f64,
    pub weight: f64,
}

/// Emission spectrum on a uniform grid. Densities are powers per GHz, in
/// units where the total emitted power equals the photon emission rate
/// ρ11/T1 [1/ns].
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    /// Incoherent density sampled on the grid (after any convolution).
    pub incoherent: Vec<f64>,
    /// Total weight of the coherent (Rayleigh) lines.
    pub coherent_weight: f64,
    lines: Vec<CoherentLine>,
    terms: Vec<Term>,
    laser_freq: f64,
    gamma: f64,
    /// Cumulative Lorentzian broadening, HWHM [rad/ns].
    broadening: f64,
}

fn solve3(a: &Mat3, b: &[C; 3]) -> [C; 3] {
    let det = |m: &Mat3| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [C::new(0.0, 0.0); 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut ak = *a;
        for r in 0..3 {
            ak[r][k] = b[r];
        }
        *o = det(&ak) / d;
    }
    out
}

fn regression_term(params: &TlsParams, omega: f64, detuning: f64, weight: f64) -> (Term, f64) {
    let ss = steady_state(params, omega, detuning);
    let gamma = params.gamma();
    let g = params.coherence_rate();
    let i = C::new(0.0, 1.0);
    let (w, d) = (C::new(omega, 0.0), C::new(detuning, 0.0));
    let m = [
        [i * d - g, C::new(0.0, 0.0), i * w],
        [C::new(0.0, 0.0), -i * d - g, -i * w],
        [0.5 * i * w, -0.5 * i * w, C::new(-gamma, 0.0)],
    ];
    // ⟨σ₋⟩ = ρ10 = conj(ρ01)
    let s = C::new(ss.rho01_re, -ss.rho01_im);
    let y0 = [-s * s, C::new(ss.rho11 - s.norm_sqr(), 0.0), -ss.rho11 * s];
    (Term { weight, m, y0 }, weight * gamma * s.norm_sqr())
}

impl Spectrum {
    fn from_terms(
        grid: FrequencyGrid,
        params: &TlsParams,
        terms: Vec<Term>,
        coherent_weight: f64,
        laser_freq: f64,
    ) -> Self {
        let lines = if coherent_weight > 0.0 {
            vec![CoherentLine { freq: laser_freq, weight: coherent_weight }]
        } else {
            Vec::new()
        };
        let mut spec = Self {
            grid,
            incoherent: Vec::new(),
            coherent_weight,
            lines,
            terms,
            laser_freq,
            gamma: params.gamma(),
            broadening: 0.0,
        };
        spec.resample();
        spec
    }

    fn resample(&mut self) {
        let vals: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.incoherent_at(self.grid.freq(i)))
            .collect();
        let peak = vals.iter().fold(0.0f64, |m, v| m.max(*v));
        // Clip round-off below zero; anything larger is a genuine defect.
        self.incoherent = vals
            .into_iter()
            .map(|v| {
                debug_assert!(v >= -1e-9 * peak.max(f64::MIN_POSITIVE), "negative density {v}");
                v.max(0.0)
            })
            .collect();
    }

    /// Incoherent density at `nu` [GHz], evaluated analytically.
    pub fn incoherent_at(&self, nu: f64) -> f64 {
        let omega = to_angular(nu - self.laser_freq);
        let s = C::new(self.broadening, omega);
        self.terms
            .iter()
            .map(|t| {
                let mut a = t.m;
                for (k, row) in a.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if k == j { s - *v } else { -*v };
                    }
                }
                2.0 * self.gamma * t.weight * solve3(&a, &t.y0)[1].re
            })
            .sum()
    }

    /// Density of the coherent lines at `nu`: zero until a convolution has
    /// given them a width.
    pub fn coherent_at(&self, nu: f64) -> f64 {
        if self.broadening == 0.0 {
            return 0.0;
        }
        let h = to_ghz(self.broadening);
        self.lines
            .iter()
            .map(|l| l.weight * h / std::f64::consts::PI / ((nu - l.freq).powi(2) + h * h))
            .sum()
    }

    /// Full density (incoherent plus broadened lines) at `nu`.
    pub fn density_at(&self, nu: f64) -> f64 {
        self.incoherent_at(nu).max(0.0) + self.coherent_at(nu)
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.grid.freqs()
    }

    /// Coherent-line density sampled on the grid.
    pub fn coherent_density(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.coherent_at(self.grid.freq(i))).collect()
    }

    /// Incoherent plus materialized coherent density on the grid.
    pub fn total_density(&self) -> Vec<f64> {
        self.incoherent
            .iter()
            .zip(self.coherent_density())
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn lines(&self) -> &[CoherentLine] {
        &self.lines
    }

    /// Lorentzian FWHM [GHz] accumulated by convolutions.
    pub fn broadening_fwhm(&self) -> f64 {
        2.0 * to_ghz(self.broadening)
    }

    /// Total emitted power over all frequencies (not just the grid):
    /// incoherent integral plus coherent weight.
    pub fn total_power(&self) -> f64 {
        self.incoherent_power() + self.coherent_weight
    }

    /// Integral of the incoherent density over all frequencies.
    pub fn incoherent_power(&self) -> f64 {
        self.terms.iter().map(|t| self.gamma * t.weight * t.y0[1].re).sum()
    }

    /// Trapezoid integral of the sampled total density over the grid.
    pub fn grid_power(&self) -> f64 {
        let v = self.total_density();
        let inner: f64 = v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]);
        let coherent = if self.broadening == 0.0 { self.coherent_weight } else { 0.0 };
        inner * self.grid.step() + coherent
    }
}

fn check_grid(params: &TlsParams, grid: &FrequencyGrid) -> Result<()> {
    let fwhm = to_ghz(2.0 / params.t2());
    if grid.step() > fwhm / 4.0 {
        return Err(Error::GridTooCoarse {
            reason: format!("frequency step {} GHz exceeds a quarter of the 2/T2 linewidth ({} GHz)", grid.step(), fwhm),
        });
    }
    Ok(())
}

/// Steady-state emission spectrum under coherent drive of Rabi frequency
/// `omega` and laser detuning `detuning` (both rad/ns).
pub fn qrt_spectrum(params: &TlsParams, omega: f64, detuning: f64, grid: &FrequencyGrid) -> Result<Spectrum> {
    if !(omega >= 0.0 && omega.is_finite() && detuning.is_finite()) {
        return Err(Error::param("omega/detuning", "omega must be >= 0 and both finite"));
    }
    check_grid(params, grid)?;
    let (term, coherent) = regression_term(params, omega, detuning, 1.0);
    Ok(Spectrum::from_terms(*grid, params, vec![term], coherent, to_ghz(detuning)))
}

/// Order actually used by a converged chaotic average.
#[derive(Debug, Clone)]
pub struct ChaoticSpectrum {
    pub spectrum: Spectrum,
    pub order: usize,
}

fn chaotic_at_order(params: &TlsParams, mean_omega: f64, grid: &FrequencyGrid, order: usize) -> Result<Spectrum> {
    let rule = GaussLaguerre::new(order)?;
    let m2 = mean_omega * mean_omega;
    let mut terms = Vec::with_capacity(order);
    let mut coherent = 0.0;
    for (x, w) in rule.iter() {
        let (term, c) = regression_term(params, (m2 * x).sqrt(), 0.0, w);
        terms.push(term);
        coherent += c;
    }
    Ok(Spectrum::from_terms(*grid, params, terms, coherent, 0.0))
}

/// Resonant emission spectrum averaged over chaotic intensity fluctuations,
/// Ω² ~ Exponential(Ω̄²), by Gauss–Laguerre quadrature. The order starts at
/// `order` and doubles until successive results differ by less than 1e-4
/// of the spectral peak.
pub fn chaotic_spectrum(params: &TlsParams, mean_omega: f64, grid: &FrequencyGrid, order: usize) -> Result<ChaoticSpectrum> {
    if !(mean_omega >= 0.0 && mean_omega.is_finite()) {
        return Err(Error::param("mean_omega", "must be finite and >= 0"));
    }
    check_grid(params, grid)?;
    let mut n = order.max(2);
    let mut prev = chaotic_at_order(params, mean_omega, grid, n)?;
    while 2 * n <= GaussLaguerre::MAX_ORDER {
        n *= 2;
        let next = chaotic_at_order(params, mean_omega, grid, n)?;
        let peak = next.incoherent.iter().fold(0.0f64, |m, v| m.max(*v));
        let diff = next
            .incoherent
            .iter()
            .zip(&prev.incoherent)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let wdiff = (next.coherent_weight - prev.coherent_weight).abs();
        if diff <= 1e-4 * peak && wdiff <= 1e-4 * next.total_power().max(f64::MIN_POSITIVE) {
            return Ok(ChaoticSpectrum { spectrum: next, order: n });
        }
        prev = next;
    }
    Err(Error::Quadrature {
        reason: format!("chaotic spectrum not converged at Gauss-Laguerre order {}", GaussLaguerre::MAX_ORDER),
    })
}

/// Convolution with a unit-area Lorentzian of FWHM `fwhm` [GHz]. Coherent
/// lines become Lorentzians of their weight; total power is unchanged.
pub fn convolve_lorentzian(spec: &Spectrum, fwhm: f64) -> Result<Spectrum> {
    if !(fwhm >= 0.0 && fwhm.is_finite()) {
        return Err(Error::param("fwhm", format!("must be finite and >= 0, got {fwhm}")));
    }
    if spec.grid.span() < 10.0 * fwhm {
        return Err(Error::GridTooCoarse {
            reason: format!("grid span {} GHz is below 10*fwhm = {} GHz", spec.grid.span(), 10.0 * fwhm),
        });
    }
    let mut out = spec.clone();
    out.broadening += to_angular(0.5 * fwhm);
    out.resample();
    Ok(out)
}

/// A spectrum made of coherent lines only, for instrument-response studies.
pub fn line_spectrum(grid: &FrequencyGrid, lines: &[CoherentLine]) -> Spectrum {
    Spectrum {
        grid: *grid,
        incoherent: vec![0.0; grid.len()],
        coherent_weight: lines.iter().map(|l| l.weight).sum(),
        lines: lines.to_vec(),
        terms: Vec::new(),
        laser_freq: 0.0,
        gamma: 0.0,
        broadening: 0.0,
    }
}
