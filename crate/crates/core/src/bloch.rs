//! Optical Bloch equations of a driven two-level emitter in the rotating
//! frame, their steady states, and averages over chaotic intensity
//! fluctuations.
//!
//! State convention: `rho11` is the excited-state population and
//! `rho01 = ⟨0|ρ|1⟩` the coherence. With Rabi frequency Ω, detuning Δω and
//! lifetimes T1, T2 the equations of motion are
//!
//! ```text
//! dρ11/dt = i(Ω/2)(ρ10 − ρ01) − ρ11/T1 = Ω·Im ρ01 − ρ11/T1
//! dρ01/dt = −(iΔω + 1/T2) ρ01 − i(Ω/2)(ρ11 − ρ00)
//! ```

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drive::DrivePulse;
use crate::error::{Error, Result};
use crate::params::TlsParams;
use crate::photonstat::sample_chaotic_intensity;
use crate::quad;
use crate::rng::RngStream;
use crate::special::one_minus_y_exp1_scaled;

pub use crate::special::exp1;

/// Density matrix of the two-level system, stored as excited population and
/// the complex coherence ρ01.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochState {
    pub rho11: f64,
    pub rho01_re: f64,
    pub rho01_im: f64,
}

impl BlochState {
    pub const fn ground() -> Self {
        Self { rho11: 0.0, rho01_re: 0.0, rho01_im: 0.0 }
    }

    pub const fn excited() -> Self {
        Self { rho11: 1.0, rho01_re: 0.0, rho01_im: 0.0 }
    }

    /// Population bounds and |ρ01|² ≤ ρ11(1 − ρ11), both up to `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let coh = self.rho01_re * self.rho01_re + self.rho01_im * self.rho01_im;
        self.rho11 >= -tol
            && self.rho11 <= 1.0 + tol
            && coh <= self.rho11 * (1.0 - self.rho11) + tol
    }

    pub fn norm(&self) -> f64 {
        (self.rho11 * self.rho11 + self.rho01_re * self.rho01_re + self.rho01_im * self.rho01_im).sqrt()
    }

    fn axpy(&self, a: f64, d: &Self) -> Self {
        Self {
            rho11: self.rho11 + a * d.rho11,
            rho01_re: self.rho01_re + a * d.rho01_re,
            rho01_im: self.rho01_im + a * d.rho01_im,
        }
    }
}

/// Uniformly sampled time series of Bloch states starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTrace {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<BlochState>,
}

impl BlochTrace {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|i| self.time(i))
    }

    pub fn populations(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rho11).collect()
    }

    pub fn last(&self) -> &BlochState {
        self.samples.last().expect("trace is non-empty")
    }
}

/// Time derivative of the Bloch state under instantaneous Rabi frequency
/// `omega_t` and detuning.
pub fn bloch_derivative(state: &BlochState, params: &TlsParams, omega_t: f64, detuning: f64) -> BlochState {
    let gamma = params.gamma();
    let g2 = params.coherence_rate();
    let inversion = 2.0 * state.rho11 - 1.0;
    let (x, y) = (state.rho01_re, state.rho01_im);
    BlochState {
        rho11: omega_t * y - gamma * state.rho11,
        // −(iΔ + γ)(x + iy) − i(Ω/2)w
        rho01_re: -g2 * x + detuning * y,
        rho01_im: -g2 * y - detuning * x - 0.5 * omega_t * inversion,
    }
}

fn rk4_step(s: &BlochState, params: &TlsParams, omega: f64, detuning: f64, h: f64) -> BlochState {
    let k1 = bloch_derivative(s, params, omega, detuning);
    let k2 = bloch_derivative(&s.axpy(0.5 * h, &k1), params, omega, detuning);
    let k3 = bloch_derivative(&s.axpy(0.5 * h, &k2), params, omega, detuning);
    let k4 = bloch_derivative(&s.axpy(h, &k3), params, omega, detuning);
    BlochState {
        rho11: s.rho11 + h / 6.0 * (k1.rho11 + 2.0 * k2.rho11 + 2.0 * k3.rho11 + k4.rho11),
        rho01_re: s.rho01_re + h / 6.0 * (k1.rho01_re + 2.0 * k2.rho01_re + 2.0 * k3.rho01_re + k4.rho01_re),
        rho01_im: s.rho01_im + h / 6.0 * (k1.rho01_im + 2.0 * k2.rho01_im + 2.0 * k3.rho01_im + k4.rho01_im),
    }
}

/// Largest RK4 step allowed for a drive of peak Rabi frequency `omega_max`:
/// min(T2, 2π/Ω)/50.
pub fn max_step(params: &TlsParams, omega_max: f64) -> f64 {
    let period = if omega_max > 0.0 { std::f64::consts::TAU / omega_max } else { f64::INFINITY };
    params.t2().min(period) / 50.0
}

fn peak_rabi(pulse: &DrivePulse) -> f64 {
    let amp = pulse
        .envelope()
        .segments()
        .iter()
        .map(|s| s.amplitude)
        .fold(0.0, f64::max);
    pulse.rabi() * amp
}

/// Fixed-step RK4 with `substeps` internal steps per recorded sample. The
/// drive amplitude of each internal step is read at the step midpoint, which
/// snaps envelope edges to the internal grid.
fn propagate(
    params: &TlsParams,
    pulse: &DrivePulse,
    record_dt: f64,
    n_records: usize,
    substeps: usize,
    initial: BlochState,
) -> BlochTrace {
    let h = record_dt / substeps as f64;
    let det = pulse.detuning();
    let mut samples = Vec::with_capacity(n_records + 1);
    let mut s = initial;
    samples.push(s);
    for k in 0..n_records {
        for j in 0..substeps {
            let mid = (k * substeps + j) as f64 * h + 0.5 * h;
            s = rk4_step(&s, params, pulse.rabi_at(mid), det, h);
        }
        samples.push(s);
    }
    BlochTrace { t0: 0.0, dt: record_dt, samples }
}

/// Integrates the Bloch equations from `initial` at t = 0 to `t_end` with a
/// fixed RK4 step `dt`. The step must resolve both T2 and the Rabi period.
pub fn integrate(params: &TlsParams, pulse: &DrivePulse, t_end: f64, dt: f64, initial: BlochState) -> Result<BlochTrace> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("must be finite and > 0, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    let limit = max_step(params, peak_rabi(pulse));
    if dt > limit * (1.0 + 1e-12) {
        // Suggest a step that divides t_end evenly.
        let n = (t_end / limit).ceil();
        return Err(Error::StepTooCoarse { dt, max_dt: limit, suggested: t_end / n });
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    Ok(propagate(params, pulse, dt, n, 1, initial))
}

/// Like [`integrate`], but records on the `record_dt` grid and subdivides
/// each recorded interval as needed to satisfy the step guard.
pub fn integrate_resampled(
    params: &TlsParams,
    pulse: &DrivePulse,
    t_end: f64,
    record_dt: f64,
    initial: BlochState,
) -> Result<BlochTrace> {
    if !(t_end > 0.0 && record_dt > 0.0) {
        return Err(Error::param("t_end/record_dt", "must be > 0"));
    }
    let limit = max_step(params, peak_rabi(pulse));
    let substeps = (record_dt / limit).ceil().max(1.0) as usize;
    let n = (t_end / record_dt).round().max(1.0) as usize;
    Ok(propagate(params, pulse, record_dt, n, substeps, initial))
}

/// RK4 propagator of one interval under constant drive, as the affine map
/// x ↦ A x + b that the linear Bloch equations make it.
#[derive(Debug, Clone, Copy)]
struct AffineStep {
    a: [[f64; 3]; 3],
    b: [f64; 3],
}

impl AffineStep {
    fn new(params: &TlsParams, omega: f64, detuning: f64, span: f64) -> Self {
        let n = (span / max_step(params, omega)).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let run = |s: BlochState| {
            let mut s = s;
            for _ in 0..n {
                s = rk4_step(&s, params, omega, detuning, h);
            }
            [s.rho11, s.rho01_re, s.rho01_im]
        };
        let b = run(BlochState::default());
        let mut a = [[0.0; 3]; 3];
        for k in 0..3 {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            let col = run(BlochState { rho11: e[0], rho01_re: e[1], rho01_im: e[2] });
            for r in 0..3 {
                a[r][k] = col[r] - b[r];
            }
        }
        Self { a, b }
    }

    fn apply(&self, s: &BlochState) -> BlochState {
        let x = [s.rho11, s.rho01_re, s.rho01_im];
        let y: [f64; 3] = std::array::from_fn(|r| self.a[r][0] * x[0] + self.a[r][1] * x[1] + self.a[r][2] * x[2] + self.b[r]);
        BlochState { rho11: y[0], rho01_re: y[1], rho01_im: y[2] }
    }
}

/// States at the (ascending, non-negative) `times` under constant drive,
/// starting from `initial` at t = 0. Each interval is subdivided so the RK4
/// step satisfies [`max_step`]; repeated interval lengths reuse the
/// resulting one-interval map.
pub fn sample_constant_drive(
    params: &TlsParams,
    omega: f64,
    detuning: f64,
    initial: BlochState,
    times: &[f64],
) -> Result<Vec<BlochState>> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "must be finite, non-negative and ascending"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut cache: Option<(f64, AffineStep)> = None;
    let mut s = initial;
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let step = match cache {
                Some((len, step)) if (len - span).abs() <= 1e-12 * len => step,
                _ => {
                    let step = AffineStep::new(params, omega, detuning, span);
                    cache = Some((span, step));
                    step
                }
            };
            s = step.apply(&s);
        }
        t = target;
        out.push(s);
    }
    Ok(out)
}

/// Full steady state (population and coherence) under constant drive.
pub fn steady_state(params: &TlsParams, omega: f64, detuning: f64) -> BlochState {
    let rho11 = steady_state_population(params, omega, detuning);
    let w = 2.0 * rho11 - 1.0;
    let g2 = params.coherence_rate();
    // ρ01 = −i(Ω/2) w / (γ + iΔ)
    let denom = g2 * g2 + detuning * detuning;
    let a = -0.5 * omega * w;
    BlochState {
        rho11,
        rho01_re: a * detuning / denom,
        rho01_im: a * g2 / denom,
    }
}

/// Steady-state excited population
/// ½ Ω²(T1/T2) / (Δω² + 1/T2² + Ω² T1/T2).
pub fn steady_state_population(params: &TlsParams, omega: f64, detuning: f64) -> f64 {
    let (t1, t2) = (params.t1(), params.t2());
    let drive = omega * omega * t1 / t2;
    if drive == 0.0 {
        return 0.0;
    }
    0.5 * drive / (detuning * detuning + 1.0 / (t2 * t2) + drive)
}

/// Steady-state population averaged over chaotic intensity fluctuations,
/// Ω² ~ Exponential(Ω̄²), in closed form.
///
/// With c = Ω̄²(T1/T2)/(Δω² + 1/T2²) (equal to S̄ on resonance) the average
/// is ½[1 − (1/c) e^{1/c} E₁(1/c)].
pub fn chaotic_steady_state(params: &TlsParams, mean_omega: f64, detuning: f64) -> f64 {
    let (t1, t2) = (params.t1(), params.t2());
    let b = detuning * detuning + 1.0 / (t2 * t2);
    let c = mean_omega * mean_omega * t1 / t2 / b;
    if c == 0.0 {
        return 0.0;
    }
    0.5 * one_minus_y_exp1_scaled(1.0 / c).expect("1/c > 0")
}

/// Chaotic average by adaptive quadrature over Ω² ∈ [0, L·Ω̄²], doubling the
/// cutoff L from 50 until the result changes by less than 1e-9 relative.
pub fn chaotic_steady_state_quadrature(params: &TlsParams, mean_omega: f64, detuning: f64) -> Result<f64> {
    let m = mean_omega * mean_omega;
    if m == 0.0 {
        return Ok(0.0);
    }
    let integrand = |w2: f64| steady_state_population(params, w2.sqrt(), detuning) * (-w2 / m).exp() / m;
    let mut cutoff = 50.0;
    let mut prev = quad::integrate(integrand, 0.0, cutoff * m, 1e-15, 1e-12)?.value;
    for _ in 0..6 {
        cutoff *= 2.0;
        let next = quad::integrate(integrand, 0.0, cutoff * m, 1e-15, 1e-12)?.value;
        if ((next - prev) / next).abs() < 1e-9 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { reason: "cutoff doubling did not settle".into() })
}

/// Options of a chaotic-ensemble transient.
#[derive(Debug, Clone, Copy)]
pub struct TransientOptions {
    /// End of the recorded window [ns].
    pub t_end: f64,
    /// Recording step [ns]; each realization subdivides it as needed.
    pub dt: f64,
    /// Correlation time of the chaotic source [ns].
    pub tau_corr: f64,
    /// Realizations per reduction partition. Results depend on this value
    /// but not on the number of worker threads.
    pub partition: usize,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self { t_end: 3.0, dt: 0.01, tau_corr: 901.8, partition: 64 }
    }
}

/// Ensemble mean of Bloch traces over chaotic field realizations.
#[derive(Debug, Clone)]
pub struct ChaoticTransient {
    pub mean: BlochTrace,
    /// Standard error of the mean population at each sample.
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone)]
struct Accum {
    sum: Vec<[f64; 3]>,
    sum_sq: Vec<f64>,
}

impl Accum {
    fn zeros(n: usize) -> Self {
        Self { sum: vec![[0.0; 3]; n], sum_sq: vec![0.0; n] }
    }

    fn add_trace(&mut self, t: &BlochTrace) {
        for (i, s) in t.samples.iter().enumerate() {
            self.sum[i][0] += s.rho11;
            self.sum[i][1] += s.rho01_re;
            self.sum[i][2] += s.rho01_im;
            self.sum_sq[i] += s.rho11 * s.rho11;
        }
    }

    fn merge(&mut self, other: &Accum) {
        for i in 0..self.sum.len() {
            for k in 0..3 {
                self.sum[i][k] += other.sum[i][k];
            }
            self.sum_sq[i] += other.sum_sq[i];
        }
    }
}

/// Averages Bloch evolutions over `n_samples` quasi-static chaotic
/// realizations. Each realization draws Ω² from the exponential law with
/// mean `pulse.rabi()²`, holds it fixed over the window, and is integrated
/// from the ground state.
pub fn chaotic_transient(
    params: &TlsParams,
    pulse: &DrivePulse,
    n_samples: usize,
    rng: &RngStream,
    opts: &TransientOptions,
) -> Result<ChaoticTransient> {
    if n_samples < 100 {
        return Err(Error::param("n_samples", format!("must be >= 100, got {n_samples}")));
    }
    if opts.partition == 0 {
        return Err(Error::param("partition", "must be > 0"));
    }
    let mut warnings = Vec::new();
    let window = pulse.duration().unwrap_or(opts.t_end);
    if window > opts.tau_corr / 10.0 {
        let msg = format!(
            "drive window {window} ns exceeds tau_corr/10 = {} ns; quasi-static averaging is not valid",
            opts.tau_corr / 10.0
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let n_rec = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let mean_sq = pulse.rabi() * pulse.rabi();

    let n_parts = n_samples.div_ceil(opts.partition);
    let partials: Vec<Accum> = (0..n_parts)
        .into_par_iter()
        .map(|p| {
            let mut acc = Accum::zeros(n_rec + 1);
            let lo = p * opts.partition;
            let hi = (lo + opts.partition).min(n_samples);
            for i in lo..hi {
                let mut r = rng.split(i as u64);
                let omega = sample_chaotic_intensity(&mut r, mean_sq).sqrt();
                let realization = pulse.with_rabi(omega);
                let limit = max_step(params, peak_rabi(&realization));
                let substeps = (opts.dt / limit).ceil().max(1.0) as usize;
                let tr = propagate(params, &realization, opts.dt, n_rec, substeps, BlochState::ground());
                acc.add_trace(&tr);
            }
            acc
        })
        .collect();

    let mut total = Accum::zeros(n_rec + 1);
    for part in &partials {
        total.merge(part);
    }
    let nf = n_samples as f64;
    let samples = total
        .sum
        .iter()
        .map(|s| BlochState { rho11: s[0] / nf, rho01_re: s[1] / nf, rho01_im: s[2] / nf })
        .collect::<Vec<_>>();
    let stderr = total
        .sum
        .iter()
        .zip(&total.sum_sq)
        .map(|(s, &sq)| {
            let mean = s[0] / nf;
            let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    Ok(ChaoticTransient {
        mean: BlochTrace { t0: 0.0, dt: opts.dt, samples },
        stderr,
        n_samples,
        warnings,
    })
}

/// Indices of interior local maxima of `ys`.
pub fn local_maxima(ys: &[f64]) -> Vec<usize> {
    (1..ys.len().saturating_sub(1))
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
        .collect()
}
