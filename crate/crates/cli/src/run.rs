//! Experiment runners. Each writes its CSV files into the output directory
//! and returns a JSON summary for the run sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Value};
use tlsim_core::bloch::{chaotic_steady_state, chaotic_transient, integrate, max_step, steady_state_population, BlochState};
use tlsim_core::emission::{
    blinking_envelope, chaotic_g2, chaotic_spectrum, convolve_gaussian, convolve_lorentzian, lag_grid, qrt_g2,
    qrt_spectrum, ChaoticG2Options, EmissionG2, FrequencyGrid,
};
use tlsim_core::export;
use tlsim_core::lamp::{estimate_g1, estimate_g2, fit_gaussian_g2, lamp_linewidths, synthesize_field, FieldTrace};
use tlsim_core::params::{omega_from_saturation, power_linewidth};
use tlsim_core::trajectory::{
    apply_detector_model, correlate, fit_bidirectional_exponential, simulate_tags, DetectorModel, TagStream,
    TrajectoryOptions,
};
use tlsim_core::{to_ghz, validate, DrivePulse, LightStatistics, RngStream, TlsParams};

use crate::config::{BlinkingConfig, Experiment, Resolved, RunConfig};
use crate::error::CliError;

/// Output directory plus the list of files written to it.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    /// Creates `name`, hands a buffered writer to `body`, and flushes.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> tlsim_core::Result<()>,
    {
        let path = self.dir.join(name);
        let io_err = |source| CliError::Output { path: path.display().to_string(), source };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w)?;
        w.flush().map_err(io_err)?;
        info!("wrote {}", path.display());
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

pub fn execute(experiment: Experiment, cfg: &RunConfig, p: &Resolved, out: &mut Output) -> Result<Value, CliError> {
    let rng = RngStream::new(cfg.seed);
    match experiment {
        Experiment::Saturation => saturation(cfg, p, out),
        Experiment::Linewidth => linewidth(cfg, p, out),
        Experiment::Rabi => rabi(cfg, p, &rng, out),
        Experiment::Mollow => mollow(cfg, p, out),
        Experiment::G2 => g2(cfg, p, &rng, out),
        Experiment::Lamp => lamp(cfg, &rng, out),
        Experiment::Tags => tags(cfg, p, &rng, out),
        Experiment::Validate => validation(cfg, p, out),
    }
}

fn saturation(cfg: &RunConfig, p: &Resolved, out: &mut Output) -> Result<Value, CliError> {
    let sw = &cfg.saturation;
    let rows: Vec<(f64, f64, f64)> = sw
        .values()
        .into_iter()
        .map(|s| {
            let omega = omega_from_saturation(s, &p.tls);
            (s, steady_state_population(&p.tls, omega, sw.detuning), chaotic_steady_state(&p.tls, omega, sw.detuning))
        })
        .collect();
    out.write("saturation.csv", |w| export::write_saturation(w, &rows))?;
    Ok(json!({ "rows": rows.len() }))
}

fn linewidth(cfg: &RunConfig, p: &Resolved, out: &mut Output) -> Result<Value, CliError> {
    let rows: Vec<(f64, f64)> = cfg
        .linewidth
        .values()
        .into_iter()
        .map(|s| (s, power_linewidth(omega_from_saturation(s, &p.tls), &p.tls)))
        .collect();
    out.write("linewidth.csv", |w| export::write_linewidth(w, &rows))?;
    let zero = 2.0 / p.tls.t2();
    Ok(json!({
        "rows": rows.len(),
        "fwhm_weak_limit_rad_per_ns": zero,
        "fwhm_weak_limit_ghz": to_ghz(zero),
    }))
}

fn rabi(cfg: &RunConfig, p: &Resolved, rng: &RngStream, out: &mut Output) -> Result<Value, CliError> {
    let rc = &cfg.rabi;
    let opts = rc.transient_options();
    let mut summary = Vec::new();
    for (k, &omega) in rc.rabi.iter().enumerate() {
        let envelope = tlsim_core::Envelope::square(0.0, rc.pulse_width)?;
        let coherent = DrivePulse::new(omega, rc.detuning, envelope.clone(), LightStatistics::Coherent)?;
        let trace = integrate(&p.tls, &coherent, rc.t_end, rc.dt.min(max_step(&p.tls, omega)), BlochState::ground())?;
        let trace = resample(trace, rc.dt);
        out.write(&format!("rabi_{omega}_coherent.csv"), |w| export::write_trace(w, &trace))?;

        let chaotic = DrivePulse::new(omega, rc.detuning, envelope, LightStatistics::Chaotic)?;
        let ens = chaotic_transient(&p.tls, &chaotic, rc.samples, &rng.split(k as u64), &opts)?;
        out.write(&format!("rabi_{omega}_chaotic.csv"), |w| export::write_transient(w, &ens))?;
        summary.push(json!({
            "rabi_rad_per_ns": omega,
            "first_maximum_expected_ns": std::f64::consts::PI / omega,
            "samples": ens.n_samples,
            "warnings": ens.warnings,
        }));
    }
    Ok(json!({ "traces": summary }))
}

/// Keeps every sample of `trace` that falls on the recording grid `dt`.
fn resample(trace: tlsim_core::bloch::BlochTrace, dt: f64) -> tlsim_core::bloch::BlochTrace {
    let stride = (dt / trace.dt).round().max(1.0) as usize;
    if stride == 1 {
        return trace;
    }
    tlsim_core::bloch::BlochTrace {
        t0: trace.t0,
        dt: trace.dt * stride as f64,
        samples: trace.samples.into_iter().step_by(stride).collect(),
    }
}

fn mollow(cfg: &RunConfig, p: &Resolved, out: &mut Output) -> Result<Value, CliError> {
    let mc = &cfg.mollow;
    let grid = FrequencyGrid::symmetric(mc.half_span, mc.step)?;
    let fpi = if mc.fpi { p.instrument.fpi_fwhm() } else { 0.0 };
    let mut summary = Vec::new();
    for &omega in &mc.rabi {
        let raw = qrt_spectrum(&p.tls, omega, 0.0, &grid)?;
        let seen = convolve_lorentzian(&raw, fpi)?;
        out.write(&format!("mollow_{omega}_coherent.csv"), |w| export::write_spectrum(w, &raw, &seen))?;
        let mut entry = json!({
            "rabi_rad_per_ns": omega,
            "sideband_expected_ghz": to_ghz(omega),
            "coherent_weight": raw.coherent_weight,
            "total_power": raw.total_power(),
        });
        if mc.chaotic {
            let ch = chaotic_spectrum(&p.tls, omega, &grid, mc.order)?;
            let seen = convolve_lorentzian(&ch.spectrum, fpi)?;
            out.write(&format!("mollow_{omega}_chaotic.csv"), |w| export::write_spectrum(w, &ch.spectrum, &seen))?;
            entry["chaotic_order"] = json!(ch.order);
            entry["chaotic_total_power"] = json!(ch.spectrum.total_power());
        }
        summary.push(entry);
    }
    Ok(json!({ "fpi_fwhm_ghz": fpi, "spectra": summary }))
}

/// Expected detected count rate for a trajectory run [1/ns].
pub fn detected_rate(
    tls: &TlsParams,
    rabi: f64,
    detuning: f64,
    statistics: LightStatistics,
    efficiency: f64,
    blinking: Option<&BlinkingConfig>,
) -> f64 {
    let rho = match statistics {
        LightStatistics::Coherent => steady_state_population(tls, rabi, detuning),
        LightStatistics::Chaotic => chaotic_steady_state(tls, rabi, detuning),
    };
    efficiency * rho / tls.t1() * blinking.map_or(1.0, |b| b.on_fraction)
}

fn g2(cfg: &RunConfig, p: &Resolved, rng: &RngStream, out: &mut Output) -> Result<Value, CliError> {
    let gc = &cfg.g2;
    let lags = lag_grid(gc.max_lag, gc.lag_step)?;
    let mut analytic = match gc.statistics {
        LightStatistics::Coherent => qrt_g2(&p.tls, gc.rabi, gc.detuning, &lags)?,
        LightStatistics::Chaotic => {
            if gc.detuning != 0.0 {
                return Err(CliError::Config("`g2.detuning`: chaotic g2 is resonant only".into()));
            }
            let opts = ChaoticG2Options { tau_corr: gc.tau_corr, ..ChaoticG2Options::default() };
            chaotic_g2(&p.tls, gc.rabi, &lags, &opts)?
        }
    };
    if let Some(b) = &gc.blinking {
        analytic = blinking_envelope(&analytic, b.on_fraction, b.tau_blink)?;
    }
    out.write("g2_analytic.csv", |w| export::write_g2(w, &analytic))?;
    let mut summary = json!({
        "g2_zero": analytic.value_at(0.0),
        "valid_max_lag_ns": analytic.valid_max_lag,
    });
    let seen: Option<EmissionG2> = if gc.irf {
        let c = convolve_gaussian(&analytic, p.instrument.detector_fwhm())?;
        out.write("g2_analytic_irf.csv", |w| export::write_g2(w, &c))?;
        summary["g2_zero_after_irf"] = json!(c.value_at(0.0));
        Some(c)
    } else {
        None
    };
    if gc.simulate {
        let pulse = DrivePulse::new(gc.rabi, gc.detuning, tlsim_core::Envelope::continuous(), gc.statistics)?;
        let opts = TrajectoryOptions {
            efficiency: gc.efficiency,
            blinking: gc.blinking.as_ref().map(BlinkingConfig::model),
            tau_corr: gc.tau_corr,
            ..TrajectoryOptions::default()
        };
        let raw = simulate_tags(&p.tls, &pulse, gc.duration, &opts, &rng.split(0))?;
        let detector = DetectorModel::jitter_only(if gc.irf { p.instrument.per_detector_fwhm() } else { 0.0 });
        let stream = apply_detector_model(&raw, &detector, &mut rng.split(1))?;
        let hist = correlate(&stream, gc.bin_width, gc.histogram_max_lag())?;
        out.write("g2_tags.csv", |w| export::write_histogram(w, &hist))?;
        let reference = seen.as_ref().unwrap_or(&analytic);
        let (mut worst, mut compared) = (0.0f64, 0usize);
        for (lag, c, e) in hist.window(gc.max_lag) {
            if let (Some(want), true) = (reference.bin_average(lag, gc.bin_width), e > 0.0) {
                worst = worst.max((c - want).abs() / e);
                compared += 1;
            }
        }
        summary["tags"] = json!({
            "n_channel1": hist.n1,
            "n_channel2": hist.n2,
            "duration_ns": gc.duration,
            "c_norm_at_zero": hist.c_norm[hist.lags.len() / 2],
            "max_deviation_sigma": if compared > 0 { Some(worst) } else { None },
            "bins_compared": compared,
        });
        if let Some(exclude) = gc.fit_exclude {
            let fit = fit_bidirectional_exponential(&hist, exclude)?;
            summary["blinking_fit"] = serde_json::to_value(fit).map_err(tlsim_core::Error::from)?;
        }
    }
    Ok(summary)
}

fn lamp(cfg: &RunConfig, rng: &RngStream, out: &mut Output) -> Result<Value, CliError> {
    let lc = &cfg.lamp;
    let field = synthesize_field(lc.tau_corr, lc.dt, lc.samples, &mut rng.split(0))?;
    let max_lag = lc.max_lag_factor * lc.tau_corr;
    let g1 = estimate_g1(&field, max_lag)?;
    let g2 = estimate_g2(&field, max_lag)?;
    let fit = fit_gaussian_g2(&g2)?;
    let head = FieldTrace::new(field.dt, field.amplitudes[..lc.field_points.min(field.len())].to_vec())?;
    out.write("lamp_field.csv", |w| export::write_field(w, &head))?;
    out.write("lamp_g1.csv", |w| export::write_correlation(w, &g1))?;
    out.write("lamp_g2.csv", |w| export::write_correlation(w, &g2))?;
    let siegert = g1.values.iter().zip(&g2.values).map(|(a, b)| (b - 1.0 - a * a).abs()).fold(0.0, f64::max);
    Ok(json!({
        "g2_zero": g2.values[0],
        "siegert_max_residual": siegert,
        "fit": fit,
        "linewidths_ghz": lamp_linewidths(lc.tau_corr),
    }))
}

fn tags(cfg: &RunConfig, p: &Resolved, rng: &RngStream, out: &mut Output) -> Result<Value, CliError> {
    let tc = &cfg.tags;
    let pulse = DrivePulse::new(tc.rabi, tc.detuning, tlsim_core::Envelope::continuous(), tc.statistics)?;
    let opts = TrajectoryOptions {
        efficiency: tc.efficiency,
        blinking: tc.blinking.as_ref().map(BlinkingConfig::model),
        tau_corr: tc.tau_corr,
        ..TrajectoryOptions::default()
    };
    let raw = simulate_tags(&p.tls, &pulse, tc.duration, &opts, &rng.split(0))?;
    let jitter = if tc.jitter { p.instrument.per_detector_fwhm() } else { 0.0 };
    let detector = DetectorModel { jitter_fwhm: jitter, dead_time: tc.dead_time, dark_rate: tc.dark_rate };
    let stream: TagStream = apply_detector_model(&raw, &detector, &mut rng.split(1))?;
    out.write("tags.csv", |w| export::write_tags(w, &stream))?;
    let sidecar = export::TagSidecar {
        duration_ns: tc.duration,
        seed: cfg.seed,
        t1_ns: p.tls.t1(),
        t2_ns: p.tls.t2(),
        rabi_rad_per_ns: tc.rabi,
        detuning_rad_per_ns: tc.detuning,
        statistics: format!("{:?}", tc.statistics).to_lowercase(),
        efficiency: tc.efficiency,
        jitter_fwhm_per_detector_ns: jitter,
        blinking_on_fraction: tc.blinking.map(|b| b.on_fraction),
        tau_blink_ns: tc.blinking.map(|b| b.tau_blink),
        n_channel1: stream.count(1),
        n_channel2: stream.count(2),
    };
    out.write_json("tags.json", &sidecar)?;
    let mut summary = json!({ "tags": stream.len(), "rate_per_ns": stream.rate() });
    if let Some(h) = &tc.histogram {
        let hist = correlate(&stream, h.bin_width, h.max_lag)?;
        out.write("tags_histogram.csv", |w| export::write_histogram(w, &hist))?;
        summary["c_norm_at_zero"] = json!(hist.c_norm[hist.lags.len() / 2]);
    }
    Ok(summary)
}

/// Runs the oracle suite, printing one line per check.
pub fn validation(cfg: &RunConfig, p: &Resolved, out: &mut Output) -> Result<Value, CliError> {
    let report = validate::run(&p.tls, &p.instrument, cfg.seed)?;
    for line in report.lines() {
        println!("{line}");
    }
    out.write_json("validate.json", &report)?;
    if !report.passed() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        warn!("failed checks: {}", failed.join(", "));
        return Err(CliError::Validation(failed.join(", ")));
    }
    Ok(serde_json::to_value(&report).map_err(tlsim_core::Error::from)?)
}
