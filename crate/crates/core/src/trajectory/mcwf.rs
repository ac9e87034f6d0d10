//! Monte Carlo wave-function unraveling of the driven, dephased emitter.
//!
//! Between jumps the unnormalized state evolves under
//! H_eff = [[0, Ω/2], [Ω/2, −Δω − iΓ/2]] (basis |0⟩, |1⟩), propagated exactly.
//! A radiative jump occurs when the squared norm falls to a uniform threshold
//! and resets the emitter to |0⟩. Pure dephasing is a σz jump at rate γφ/2,
//! which decays the coherence at γφ and leaves the norm untouched.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::{Tag, TagStream};
use crate::bloch::BlochState;
use crate::drive::{DrivePulse, LightStatistics};
use crate::error::{Error, Result};
use crate::lamp::LAMP_TAU_CORR;
use crate::params::TlsParams;
use crate::photonstat::sample_chaotic_intensity;
use crate::rng::RngStream;

type C = Complex64;
type Psi = [C; 2];

/// Two-state telegraph blinking: bright a fraction `on_fraction` of the
/// time, with switching correlation time `tau_blink` [ns].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blinking {
    pub on_fraction: f64,
    pub tau_blink: f64,
}

impl Default for Blinking {
    fn default() -> Self {
        Self { on_fraction: 0.5, tau_blink: 405.0 }
    }
}

impl Blinking {
    fn validate(&self) -> Result<()> {
        if !(self.on_fraction > 0.0 && self.on_fraction <= 1.0) {
            return Err(Error::param("on_fraction", format!("must lie in (0, 1], got {}", self.on_fraction)));
        }
        if !(self.tau_blink > 0.0 && self.tau_blink.is_finite()) {
            return Err(Error::param("tau_blink", format!("must be finite and > 0, got {}", self.tau_blink)));
        }
        Ok(())
    }

    fn rate_off(&self) -> f64 {
        (1.0 - self.on_fraction) / self.tau_blink
    }

    fn rate_on(&self) -> f64 {
        self.on_fraction / self.tau_blink
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Probability that an emitted photon is recorded.
    pub efficiency: f64,
    pub blinking: Option<Blinking>,
    /// Block length of quasi-static chaotic intensity resampling [ns].
    pub tau_corr: f64,
    /// Length of the independently seeded work segments [ns]. Part of the
    /// random-stream layout, so it must stay fixed for reproducibility.
    pub segment_length: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { efficiency: 1.0, blinking: None, tau_corr: LAMP_TAU_CORR, segment_length: 20_000.0 }
    }
}

/// Exact propagator of H_eff = aI + B with B² = β²I.
#[derive(Debug, Clone, Copy)]
struct Propagator {
    a: C,
    b: [[C; 2]; 2],
    beta: C,
}

impl Propagator {
    fn new(omega: f64, detuning: f64, gamma: f64) -> Self {
        let h11 = C::new(-detuning, -0.5 * gamma);
        let a = 0.5 * h11;
        let half = C::new(0.5 * omega, 0.0);
        let b = [[-a, half], [half, a]];
        let beta = (a * a + half * half).sqrt();
        Self { a, b, beta }
    }

    fn apply(&self, psi: &Psi, t: f64) -> Psi {
        let bt = self.beta * t;
        let cos = bt.cos();
        // sin(βt)/β, with its small-argument series
        let sinc = if bt.norm() < 1e-4 { C::new(t, 0.0) * (1.0 - bt * bt / 6.0) } else { bt.sin() / self.beta };
        let phase = (C::new(0.0, -1.0) * self.a * t).exp();
        let mi = C::new(0.0, -1.0) * sinc;
        let u00 = phase * (cos + mi * self.b[0][0]);
        let u01 = phase * (mi * self.b[0][1]);
        let u10 = phase * (mi * self.b[1][0]);
        let u11 = phase * (cos + mi * self.b[1][1]);
        [u00 * psi[0] + u01 * psi[1], u10 * psi[0] + u11 * psi[1]]
    }
}

fn norm_sqr(psi: &Psi) -> f64 {
    psi[0].norm_sqr() + psi[1].norm_sqr()
}

const GROUND: Psi = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
/// Cap on a single propagation span, in units of T1, keeping the
/// hyperbolic parts of the propagator far from overflow.
const MAX_SPAN_T1: f64 = 20.0;
/// Jump times are located to this absolute precision [ns].
const JUMP_TOL: f64 = 1e-9;

/// State of one trajectory between events.
struct Emitter<'a> {
    params: &'a TlsParams,
    psi: Psi,
    threshold: f64,
}

impl<'a> Emitter<'a> {
    fn new(params: &'a TlsParams, rng: &mut RngStream) -> Self {
        Self { params, psi: GROUND, threshold: rng.open01() }
    }

    /// Evolves for at most `span` under `prop`. Returns the elapsed time and
    /// whether it ended with a radiative jump.
    fn advance(&mut self, prop: &Propagator, span: f64, rng: &mut RngStream) -> (f64, bool) {
        let end = prop.apply(&self.psi, span);
        if norm_sqr(&end) > self.threshold {
            self.psi = end;
            self.renormalize();
            return (span, false);
        }
        let (mut lo, mut hi) = (0.0, span);
        while hi - lo > JUMP_TOL {
            let mid = 0.5 * (lo + hi);
            if norm_sqr(&prop.apply(&self.psi, mid)) > self.threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.psi = GROUND;
        self.threshold = rng.open01();
        (hi, true)
    }

    /// Rescales the state to unit norm and the threshold with it, which
    /// leaves the jump statistics unchanged.
    fn renormalize(&mut self) {
        let n = norm_sqr(&self.psi);
        let s = 1.0 / n.sqrt();
        self.psi = [self.psi[0] * s, self.psi[1] * s];
        self.threshold /= n;
    }

    fn dephase(&mut self) {
        self.psi[1] = -self.psi[1];
    }

    fn density(&self) -> BlochState {
        let n = norm_sqr(&self.psi);
        // ρ01 = ⟨0|ψ⟩⟨ψ|1⟩
        let rho01 = self.psi[0] * self.psi[1].conj() / n;
        BlochState { rho11: self.psi[1].norm_sqr() / n, rho01_re: rho01.re, rho01_im: rho01.im }
    }
}

fn exp_draw(rate: f64, rng: &mut RngStream) -> f64 {
    if rate > 0.0 {
        Exp::new(rate).expect("rate > 0").sample(rng)
    } else {
        f64::INFINITY
    }
}

/// Everything that changes the drive or the detection gate at discrete times.
struct Schedule<'a> {
    pulse: &'a DrivePulse,
    dephasing_rate: f64,
    next_dephase: f64,
    blinking: Option<Blinking>,
    on: bool,
    next_blink: f64,
    tau_corr: f64,
    next_block: f64,
    block_rabi: f64,
}

impl<'a> Schedule<'a> {
    fn new(params: &TlsParams, pulse: &'a DrivePulse, opts: &TrajectoryOptions, t0: f64, rng: &mut RngStream) -> Self {
        let dephasing_rate = 0.5 * params.pure_dephasing_rate();
        let mut s = Self {
            pulse,
            dephasing_rate,
            next_dephase: t0 + exp_draw(dephasing_rate, rng),
            blinking: opts.blinking,
            on: true,
            next_blink: f64::INFINITY,
            tau_corr: opts.tau_corr,
            next_block: f64::INFINITY,
            block_rabi: pulse.rabi(),
        };
        if let Some(b) = opts.blinking {
            s.on = rng.random::<f64>() < b.on_fraction;
            let rate = if s.on { b.rate_off() } else { b.rate_on() };
            s.next_blink = t0 + exp_draw(rate, rng);
        }
        if pulse.statistics() == LightStatistics::Chaotic {
            s.resample(rng);
            s.next_block = t0 + s.tau_corr;
        }
        s
    }

    fn resample(&mut self, rng: &mut RngStream) {
        let m = self.pulse.rabi() * self.pulse.rabi();
        self.block_rabi = sample_chaotic_intensity(rng, m).sqrt();
    }

    fn next_event(&self, t: f64) -> f64 {
        let edge = self.pulse.envelope().next_edge_after(t).unwrap_or(f64::INFINITY);
        edge.min(self.next_dephase).min(self.next_blink).min(self.next_block)
    }

    fn rabi_on(&self, a: f64, b: f64) -> f64 {
        let mid = if b.is_finite() { 0.5 * (a + b) } else { a };
        self.block_rabi * self.pulse.envelope().amplitude_at(mid)
    }

    /// Applies every event scheduled at or before `t`.
    fn fire(&mut self, t: f64, emitter: &mut Emitter, rng: &mut RngStream) {
        while self.next_dephase <= t {
            emitter.dephase();
            self.next_dephase += exp_draw(self.dephasing_rate, rng);
        }
        if let Some(b) = self.blinking {
            while self.next_blink <= t {
                self.on = !self.on;
                let rate = if self.on { b.rate_off() } else { b.rate_on() };
                self.next_blink += exp_draw(rate, rng);
            }
        }
        while self.next_block <= t {
            self.resample(rng);
            self.next_block += self.tau_corr;
        }
    }
}

/// Runs one trajectory over [t0, t1) from the ground state, calling
/// `emit(t, gate_open)` at each radiative jump and `sample(i, state)` at
/// each of the ascending `sample_times`.
fn run(
    params: &TlsParams,
    pulse: &DrivePulse,
    opts: &TrajectoryOptions,
    t0: f64,
    t1: f64,
    sample_times: &[f64],
    rng: &mut RngStream,
    mut emit: impl FnMut(f64, bool, &mut RngStream),
    mut sample: impl FnMut(usize, BlochState),
) {
    let mut schedule = Schedule::new(params, pulse, opts, t0, rng);
    let mut emitter = Emitter::new(params, rng);
    let max_span = MAX_SPAN_T1 * params.t1();
    let mut next_sample = 0;
    let mut t = t0;
    while t < t1 {
        while next_sample < sample_times.len() && sample_times[next_sample] <= t {
            sample(next_sample, emitter.density());
            next_sample += 1;
        }
        let sample_at = sample_times.get(next_sample).copied().unwrap_or(f64::INFINITY);
        let stop = schedule.next_event(t).min(sample_at).min(t1).min(t + max_span);
        let omega = schedule.rabi_on(t, stop);
        let prop = Propagator::new(omega, pulse.detuning(), emitter.params.gamma());
        let (dt, jumped) = emitter.advance(&prop, stop - t, rng);
        if jumped {
            t += dt;
            if t < t1 {
                emit(t, schedule.on, rng);
            }
        } else {
            t = stop;
        }
        schedule.fire(t, &mut emitter, rng);
    }
    while next_sample < sample_times.len() && sample_times[next_sample] <= t1 {
        sample(next_sample, emitter.density());
        next_sample += 1;
    }
}

/// Simulates detected photon arrival times over [0, duration).
///
/// The run is cut into fixed segments of `opts.segment_length`, each started
/// from the ground state with its own stream `rng.split(k)`; segments run in
/// parallel and are concatenated in order, so the output depends only on the
/// seed. Chaotic drive draws Ω² ~ Exponential(Ω̄²) anew every `tau_corr`.
pub fn simulate_tags(
    params: &TlsParams,
    pulse: &DrivePulse,
    duration: f64,
    opts: &TrajectoryOptions,
    rng: &RngStream,
) -> Result<TagStream> {
    if !(duration.is_finite() && duration >= 10.0 * params.t1()) {
        return Err(Error::param("duration", format!("must be finite and >= 10*T1, got {duration}")));
    }
    if !(opts.efficiency > 0.0 && opts.efficiency <= 1.0) {
        return Err(Error::param("efficiency", format!("must lie in (0, 1], got {}", opts.efficiency)));
    }
    if !(opts.tau_corr > 0.0 && opts.segment_length > 0.0) {
        return Err(Error::param("tau_corr/segment_length", "must be > 0"));
    }
    if let Some(b) = &opts.blinking {
        b.validate()?;
    }
    let n_seg = (duration / opts.segment_length).ceil() as u64;
    let segments: Vec<Vec<Tag>> = (0..n_seg)
        .into_par_iter()
        .map(|k| {
            let t0 = k as f64 * opts.segment_length;
            let t1 = ((k + 1) as f64 * opts.segment_length).min(duration);
            let mut r = rng.split(k);
            let mut tags = Vec::new();
            run(
                params,
                pulse,
                opts,
                t0,
                t1,
                &[],
                &mut r,
                |t, on, r| {
                    let detected = r.random::<f64>() < opts.efficiency;
                    let channel = if r.random::<bool>() { 1 } else { 2 };
                    if on && detected {
                        tags.push(Tag { time: t, channel });
                    }
                },
                |_, _| {},
            );
            tags
        })
        .collect();
    TagStream::new(segments.concat(), duration)
}

/// Ensemble average of the normalized trajectory state at `times`, starting
/// from the ground state at t = 0 under coherent drive. Converges to the
/// Bloch solution as `n_traj` grows.
pub fn ensemble_average(
    params: &TlsParams,
    pulse: &DrivePulse,
    times: &[f64],
    n_traj: usize,
    rng: &RngStream,
) -> Result<Vec<BlochState>> {
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "must be non-empty, non-negative and ascending"));
    }
    if n_traj == 0 {
        return Err(Error::param("n_traj", "must be > 0"));
    }
    let opts = TrajectoryOptions::default();
    let t_end = times[times.len() - 1];
    const CHUNK: usize = 256;
    let chunks = n_traj.div_ceil(CHUNK);
    let partial: Vec<Vec<BlochState>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![BlochState::default(); times.len()];
            for j in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                let mut r = rng.split(j as u64);
                run(params, pulse, &opts, 0.0, t_end, times, &mut r, |_, _, _| {}, |i, s| {
                    acc[i].rho11 += s.rho11;
                    acc[i].rho01_re += s.rho01_re;
                    acc[i].rho01_im += s.rho01_im;
                });
            }
            acc
        })
        .collect();
    let mut out = vec![BlochState::default(); times.len()];
    for acc in &partial {
        for (o, a) in out.iter_mut().zip(acc) {
            o.rho11 += a.rho11;
            o.rho01_re += a.rho01_re;
            o.rho01_im += a.rho01_im;
        }
    }
    let n = n_traj as f64;
    for o in &mut out {
        o.rho11 /= n;
        o.rho01_re /= n;
        o.rho01_im /= n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagator_matches_small_steps() {
        // Euler-free check: composition property U(a)U(b) = U(a + b) and the
        // norm derivative −Γ|c1|².
        let p = Propagator::new(7.2, 0.8, 1.56);
        let psi: Psi = [C::new(0.6, 0.1), C::new(-0.2, 0.7)];
        let ab = p.apply(&p.apply(&psi, 0.3), 0.45);
        let direct = p.apply(&psi, 0.75);
        for k in 0..2 {
            assert!((ab[k] - direct[k]).norm() < 1e-13);
        }
        let h = 1e-6;
        let dn = (norm_sqr(&p.apply(&psi, h)) - norm_sqr(&p.apply(&psi, -h))) / (2.0 * h);
        assert!((dn + 1.56 * psi[1].norm_sqr()).abs() < 1e-6);
        // zero drive, zero detuning: degenerate β → small-argument branch
        let free = Propagator::new(0.0, 0.0, 0.0);
        assert_eq!(free.apply(&psi, 3.0), psi);
    }

    #[test]
    fn propagator_solves_schrodinger() {
        let (omega, det, gamma) = (3.0, -1.2, 1.56);
        let p = Propagator::new(omega, det, gamma);
        let psi: Psi = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
        let t = 0.37;
        let h = 1e-5;
        let d: Psi = {
            let a = p.apply(&psi, t + h);
            let b = p.apply(&psi, t - h);
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        };
        let x = p.apply(&psi, t);
        let mi = C::new(0.0, -1.0);
        let rhs0 = mi * (0.5 * omega * x[1]);
        let rhs1 = mi * (0.5 * omega * x[0] + C::new(-det, -0.5 * gamma) * x[1]);
        assert!((d[0] - rhs0).norm() < 1e-8 && (d[1] - rhs1).norm() < 1e-8);
    }
}
