//! Cross-module oracle suite: every check pairs an implementation with an
//! independent route to the same number.

use serde::Serialize;

use crate::bloch::{
    chaotic_steady_state, chaotic_steady_state_quadrature, integrate, max_step, steady_state_population, BlochState,
};
use crate::drive::{DrivePulse, LightStatistics};
use crate::emission::{convolve_gaussian, lag_grid, qrt_g2, qrt_spectrum, FrequencyGrid};
use crate::error::Result;
use crate::lamp::{estimate_g1, estimate_g2, synthesize_field, LAMP_TAU_CORR};
use crate::params::{omega_from_saturation, InstrumentResponse, TlsParams};
use crate::quad;
use crate::rng::RngStream;
use crate::trajectory::{apply_detector, correlate, simulate_tags, TrajectoryOptions};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// Long-time RK4 population against the closed-form steady state.
pub fn steady_state_vs_integrator(params: &TlsParams) -> Result<Check> {
    let mut worst = 0.0f64;
    for &s in &[0.01, 0.1, 1.0, 10.0, 100.0] {
        let omega = omega_from_saturation(s, params);
        let pulse = DrivePulse::continuous(omega, LightStatistics::Coherent)?;
        let t_end = 40.0 * params.t1();
        let tr = integrate(params, &pulse, t_end, max_step(params, omega), BlochState::ground())?;
        worst = worst.max((tr.last().rho11 - steady_state_population(params, omega, 0.0)).abs());
    }
    Ok(Check::new("steady state vs RK4", worst < 1e-6, format!("max |Δρ11| = {worst:.3e} (tol 1e-6)")))
}

/// Closed-form chaotic average against adaptive quadrature.
pub fn chaotic_closed_form_vs_quadrature(params: &TlsParams) -> Result<Check> {
    let mut worst = 0.0f64;
    for &s in &[0.01, 0.1, 1.0, 10.0, 100.0] {
        let w = omega_from_saturation(s, params);
        let a = chaotic_steady_state(params, w, 0.0);
        let b = chaotic_steady_state_quadrature(params, w, 0.0)?;
        worst = worst.max(((a - b) / b).abs());
    }
    Ok(Check::new("chaotic closed form vs quadrature", worst < 1e-6, format!("max rel diff = {worst:.3e} (tol 1e-6)")))
}

/// Spectral power integrated by quadrature against the photon rate.
pub fn spectrum_power(params: &TlsParams) -> Result<Check> {
    let grid = FrequencyGrid::symmetric(4.0, 0.01)?;
    let mut worst = 0.0f64;
    for &omega in &[1.7, 7.2] {
        let spec = qrt_spectrum(params, omega, 0.0, &grid)?;
        let half = std::f64::consts::FRAC_PI_2;
        let q = quad::integrate(
            |th: f64| spec.incoherent_at(th.tan()) / th.cos().powi(2),
            -half,
            half,
            1e-13,
            1e-10,
        )?
        .value;
        let want = steady_state_population(params, omega, 0.0) / params.t1();
        worst = worst.max(((q + spec.coherent_weight - want) / want).abs());
    }
    Ok(Check::new("spectrum power vs emission rate", worst < 1e-6, format!("max rel diff = {worst:.3e} (tol 1e-6)")))
}

/// Siegert relation on a synthesized lamp field.
pub fn lamp_siegert(rng: &RngStream) -> Result<Check> {
    let tau = LAMP_TAU_CORR;
    let dt = tau / 20.0;
    let mut r = rng.split(1);
    let field = synthesize_field(tau, dt, 1 << 20, &mut r)?;
    let g1 = estimate_g1(&field, 3.0 * tau)?;
    let g2 = estimate_g2(&field, 3.0 * tau)?;
    let worst = g1
        .values
        .iter()
        .zip(&g2.values)
        .map(|(a, b)| (b - 1.0 - a * a).abs())
        .fold(0.0, f64::max);
    Ok(Check::new("lamp Siegert relation", worst < 0.05, format!("max |g2 - 1 - |g1|^2| = {worst:.4} (tol 0.05)")))
}

/// Tag correlator against the IRF-convolved analytic g².
pub fn correlator_vs_analytic(params: &TlsParams, irf: &InstrumentResponse, rng: &RngStream) -> Result<Check> {
    let omega = omega_from_saturation(0.6, params);
    let pulse = DrivePulse::continuous(omega, LightStatistics::Coherent)?;
    let tags = simulate_tags(params, &pulse, 1e6, &TrajectoryOptions::default(), &rng.split(2))?;
    let tags = apply_detector(&tags, irf.per_detector_fwhm(), &mut rng.split(3))?;
    let w = 0.2;
    let hist = correlate(&tags, w, 3.0)?;
    let g2 = convolve_gaussian(&qrt_g2(params, omega, 0.0, &lag_grid(6.0, 0.01)?)?, irf.detector_fwhm())?;
    let mut worst = 0.0f64;
    for (lag, c, e) in hist.window(3.0) {
        let want = g2.bin_average(lag, w).unwrap_or(f64::NAN);
        worst = worst.max((c - want).abs() / e);
    }
    Ok(Check::new(
        "tag correlator vs analytic g2",
        worst < 4.0,
        format!("max deviation = {worst:.2} sigma over {} bins (tol 4)", hist.lags.len()),
    ))
}

/// Runs the full suite.
pub fn run(params: &TlsParams, irf: &InstrumentResponse, seed: u64) -> Result<Report> {
    let rng = RngStream::new(seed);
    let checks = vec![
        steady_state_vs_integrator(params)?,
        chaotic_closed_form_vs_quadrature(params)?,
        spectrum_power(params)?,
        lamp_siegert(&rng)?,
        correlator_vs_analytic(params, irf, &rng)?,
    ];
    Ok(Report { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_default_parameters() {
        let report = run(&TlsParams::paper_qd(), &InstrumentResponse::paper_setup(), 7).unwrap();
        assert_eq!(report.checks.len(), 5);
        for line in report.lines() {
            println!("{line}");
        }
        assert!(report.passed());
    }
}
