//! Photon-number statistics of coherent and chaotic light.

use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonLaw {
    Poisson,
    BoseEinstein,
}

/// Photon-number distribution with mean ⟨n⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonDistribution {
    law: PhotonLaw,
    mean_n: f64,
}

impl PhotonDistribution {
    pub fn new(law: PhotonLaw, mean_n: f64) -> Result<Self> {
        if !(mean_n.is_finite() && mean_n >= 0.0) {
            return Err(Error::param("mean_n", format!("must be finite and >= 0, got {mean_n}")));
        }
        Ok(Self { law, mean_n })
    }

    pub fn poisson(mean_n: f64) -> Result<Self> {
        Self::new(PhotonLaw::Poisson, mean_n)
    }

    pub fn bose_einstein(mean_n: f64) -> Result<Self> {
        Self::new(PhotonLaw::BoseEinstein, mean_n)
    }

    pub fn law(&self) -> PhotonLaw {
        self.law
    }

    pub fn mean(&self) -> f64 {
        self.mean_n
    }

    /// Natural log of the probability of `n` photons.
    pub fn ln_pmf(&self, n: u64) -> f64 {
        let m = self.mean_n;
        let nf = n as f64;
        if m == 0.0 {
            return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        match self.law {
            PhotonLaw::Poisson => nf * m.ln() - m - ln_gamma(nf + 1.0),
            PhotonLaw::BoseEinstein => nf * m.ln() - (nf + 1.0) * m.ln_1p(),
        }
    }

    /// Probability of observing `n` photons, evaluated in log space.
    pub fn pmf(&self, n: u64) -> f64 {
        self.ln_pmf(n).exp()
    }

    /// Variance Δn².
    pub fn variance(&self) -> f64 {
        match self.law {
            PhotonLaw::Poisson => self.mean_n,
            PhotonLaw::BoseEinstein => self.mean_n + self.mean_n * self.mean_n,
        }
    }

    /// Standard deviation Δn of the photon number.
    pub fn number_std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Relative fluctuation Δn/⟨n⟩ (infinite for the vacuum).
    pub fn relative_std(&self) -> f64 {
        self.number_std() / self.mean_n
    }

    /// Smallest N such that the tail mass beyond N is below `tol`.
    pub fn cutoff(&self, tol: f64) -> u64 {
        let m = self.mean_n;
        if m == 0.0 {
            return 0;
        }
        match self.law {
            PhotonLaw::BoseEinstein => {
                // P(n > N) = (m / (1 + m))^(N + 1)
                let ratio = (m / (1.0 + m)).ln();
                (tol.ln() / ratio).ceil().max(1.0) as u64
            }
            PhotonLaw::Poisson => {
                let mut n = m.ceil() as u64;
                let step = (m.sqrt().ceil() as u64).max(1);
                // Poisson tail is bounded by a geometric series once n > m.
                loop {
                    let p = self.pmf(n);
                    let r = m / (n as f64 + 1.0);
                    if r < 1.0 && p / (1.0 - r) < tol {
                        return n;
                    }
                    n += step;
                }
            }
        }
    }

    /// Probabilities for n = 0..=N with N chosen so the tail is below `tol`.
    pub fn pmf_table(&self, tol: f64) -> Vec<f64> {
        (0..=self.cutoff(tol)).map(|n| self.pmf(n)).collect()
    }
}

/// Siegert relation g² = 1 + |g¹|² for chaotic light.
pub fn g2_from_g1(g1_abs: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&g1_abs) {
        return Err(Error::param("g1_abs", format!("must lie in [0, 1], got {g1_abs}")));
    }
    Ok(1.0 + g1_abs * g1_abs)
}

/// Draws a squared Rabi frequency Ω² from the exponential law of mean
/// `mean_omega_sq`, the intensity distribution of chaotic light.
pub fn sample_chaotic_intensity(rng: &mut RngStream, mean_omega_sq: f64) -> f64 {
    if mean_omega_sq <= 0.0 {
        return 0.0;
    }
    let x: f64 = Exp1.sample(rng);
    x * mean_omega_sq
}
