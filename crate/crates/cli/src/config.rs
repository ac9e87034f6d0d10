//! Run configuration: defaults, figure presets, JSON documents and flag
//! overrides.
//!
//! Precedence, lowest to highest: built-in defaults, `--preset`, the
//! `--config` document, command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tlsim_core::bloch::TransientOptions;
use tlsim_core::lamp::LAMP_TAU_CORR;
use tlsim_core::{InstrumentResponse, LightStatistics, ParameterSet, Registry, TlsParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Saturation,
    Rabi,
    Mollow,
    G2,
    Lamp,
    Linewidth,
    Tags,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "fig2")]
    Fig2,
    #[value(name = "fig3")]
    Fig3,
    #[value(name = "fig4")]
    Fig4,
    #[value(name = "fig5")]
    Fig5,
    #[value(name = "figS2")]
    FigS2,
    #[value(name = "figS3")]
    FigS3,
    #[value(name = "fig1c")]
    Fig1c,
}

impl Preset {
    pub fn experiment(self) -> Experiment {
        match self {
            Preset::Fig2 => Experiment::Saturation,
            Preset::Fig3 => Experiment::Rabi,
            Preset::Fig4 => Experiment::Mollow,
            Preset::Fig5 | Preset::FigS3 => Experiment::G2,
            Preset::FigS2 => Experiment::Linewidth,
            Preset::Fig1c => Experiment::Lamp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::FigS2 => "figS2",
            Preset::FigS3 => "figS3",
            Preset::Fig1c => "fig1c",
        }
    }

    pub fn config(self) -> RunConfig {
        let mut cfg = RunConfig { experiment: Some(self.experiment()), ..RunConfig::default() };
        if self == Preset::FigS3 {
            cfg.g2 = G2Config {
                max_lag: 4000.0,
                lag_step: 0.05,
                blinking: Some(BlinkingConfig::default()),
                duration: 4.0e6,
                bin_width: 20.0,
                histogram_max_lag: Some(4000.0),
                fit_exclude: Some(30.0),
                ..G2Config::default()
            };
        }
        cfg
    }
}

/// Named parameter set or inline values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Parameters {
    Named(String),
    Inline(ParameterSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub parameters: Parameters,
    /// Extra parameter sets merged over the built-in registry.
    pub registry: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub saturation: SweepConfig,
    pub linewidth: SweepConfig,
    pub rabi: RabiConfig,
    pub mollow: MollowConfig,
    pub g2: G2Config,
    pub lamp: LampConfig,
    pub tags: TagsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            parameters: Parameters::Named(tlsim_core::params::PAPER_QD.to_string()),
            registry: None,
            seed: 1,
            out: PathBuf::from("out"),
            saturation: SweepConfig::default(),
            linewidth: SweepConfig::default(),
            rabi: RabiConfig::default(),
            mollow: MollowConfig::default(),
            g2: G2Config::default(),
            lamp: LampConfig::default(),
            tags: TagsConfig::default(),
        }
    }
}

/// Logarithmic sweep of the saturation parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    /// Prepend an S = 0 row.
    pub include_zero: bool,
    pub detuning: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { s_min: 1e-2, s_max: 1e2, points: 41, include_zero: true, detuning: 0.0 }
    }
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = (self.s_min.log10(), self.s_max.log10());
        let n = self.points;
        let mut out = Vec::with_capacity(n + 1);
        if self.include_zero {
            out.push(0.0);
        }
        for k in 0..n {
            let e = if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
            out.push(10f64.powf(e));
        }
        out
    }

    fn validate(&self, key: &str) -> Result<(), CliError> {
        check(self.s_min > 0.0 && self.s_min.is_finite(), key, "s_min must be finite and > 0")?;
        check(self.s_max >= self.s_min && self.s_max.is_finite(), key, "s_max must be finite and >= s_min")?;
        check(self.points >= 1, key, "points must be >= 1")?;
        check(self.detuning.is_finite(), key, "detuning must be finite")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    /// Rabi frequencies [rad/ns]; for chaotic drive, the mean-intensity value.
    pub rabi: Vec<f64>,
    pub detuning: f64,
    pub pulse_width: f64,
    pub t_end: f64,
    pub dt: f64,
    pub samples: usize,
    pub tau_corr: f64,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            rabi: vec![5.2, 6.6, 7.2],
            detuning: 0.0,
            pulse_width: 2.0,
            t_end: 3.0,
            dt: 0.005,
            samples: 10_000,
            tau_corr: LAMP_TAU_CORR,
        }
    }
}

impl RabiConfig {
    pub fn transient_options(&self) -> TransientOptions {
        TransientOptions { t_end: self.t_end, dt: self.dt, tau_corr: self.tau_corr, ..TransientOptions::default() }
    }

    fn validate(&self) -> Result<(), CliError> {
        check(!self.rabi.is_empty(), "rabi.rabi", "needs at least one value")?;
        check(self.rabi.iter().all(|r| *r >= 0.0 && r.is_finite()), "rabi.rabi", "values must be finite and >= 0")?;
        check(self.pulse_width > 0.0 && self.pulse_width.is_finite(), "rabi.pulse_width", "must be > 0")?;
        check(self.t_end > 0.0 && self.t_end.is_finite(), "rabi.t_end", "must be > 0")?;
        check(self.dt > 0.0 && self.dt < self.t_end, "rabi.dt", "must lie in (0, t_end)")?;
        check(self.samples >= 100, "rabi.samples", "must be >= 100")?;
        check(self.tau_corr > 0.0, "rabi.tau_corr", "must be > 0")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollowConfig {
    /// Resonant Rabi frequencies [rad/ns].
    pub rabi: Vec<f64>,
    /// Half-width of the symmetric frequency grid [GHz].
    pub half_span: f64,
    /// Grid step [GHz].
    pub step: f64,
    /// Convolve with the Fabry-Perot response of the parameter set.
    pub fpi: bool,
    pub chaotic: bool,
    /// Starting Gauss-Laguerre order of the chaotic average.
    pub order: usize,
}

impl Default for MollowConfig {
    fn default() -> Self {
        Self { rabi: vec![5.2, 6.6, 7.2], half_span: 3.0, step: 0.005, fpi: true, chaotic: true, order: 16 }
    }
}

impl MollowConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(!self.rabi.is_empty(), "mollow.rabi", "needs at least one value")?;
        check(self.rabi.iter().all(|r| *r >= 0.0 && r.is_finite()), "mollow.rabi", "values must be finite and >= 0")?;
        check(self.half_span > 0.0 && self.half_span.is_finite(), "mollow.half_span", "must be > 0")?;
        check(self.step > 0.0 && self.step < self.half_span, "mollow.step", "must lie in (0, half_span)")?;
        check(self.order >= 2, "mollow.order", "must be >= 2")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlinkingConfig {
    pub on_fraction: f64,
    pub tau_blink: f64,
}

impl Default for BlinkingConfig {
    fn default() -> Self {
        let b = tlsim_core::trajectory::Blinking::default();
        Self { on_fraction: b.on_fraction, tau_blink: b.tau_blink }
    }
}

impl BlinkingConfig {
    pub fn model(&self) -> tlsim_core::trajectory::Blinking {
        tlsim_core::trajectory::Blinking { on_fraction: self.on_fraction, tau_blink: self.tau_blink }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Config {
    pub rabi: f64,
    pub detuning: f64,
    pub statistics: LightStatistics,
    /// Analytic curve lag range and step [ns].
    pub max_lag: f64,
    pub lag_step: f64,
    /// Also write the curve convolved with the detector response.
    pub irf: bool,
    pub blinking: Option<BlinkingConfig>,
    /// Run the tag Monte-Carlo path.
    pub simulate: bool,
    pub duration: f64,
    pub efficiency: f64,
    pub bin_width: f64,
    /// Histogram lag range; defaults to `max_lag`.
    pub histogram_max_lag: Option<f64>,
    /// Fit the bidirectional blinking exponential outside this lag.
    pub fit_exclude: Option<f64>,
    pub tau_corr: f64,
}

impl Default for G2Config {
    fn default() -> Self {
        Self {
            rabi: 1.7,
            detuning: 0.0,
            statistics: LightStatistics::Coherent,
            max_lag: 10.0,
            lag_step: 0.01,
            irf: true,
            blinking: None,
            simulate: true,
            duration: 4.0e6,
            efficiency: 1.0,
            bin_width: 0.1,
            histogram_max_lag: None,
            fit_exclude: None,
            tau_corr: LAMP_TAU_CORR,
        }
    }
}

impl G2Config {
    pub fn histogram_max_lag(&self) -> f64 {
        self.histogram_max_lag.unwrap_or(self.max_lag)
    }

    fn validate(&self) -> Result<(), CliError> {
        check(self.rabi >= 0.0 && self.rabi.is_finite(), "g2.rabi", "must be finite and >= 0")?;
        check(self.detuning.is_finite(), "g2.detuning", "must be finite")?;
        check(self.max_lag > 0.0 && self.max_lag.is_finite(), "g2.max_lag", "must be > 0")?;
        check(self.lag_step > 0.0 && self.lag_step < self.max_lag, "g2.lag_step", "must lie in (0, max_lag)")?;
        check(self.duration > 0.0 && self.duration.is_finite(), "g2.duration", "must be > 0")?;
        check(self.efficiency > 0.0 && self.efficiency <= 1.0, "g2.efficiency", "must lie in (0, 1]")?;
        check(self.bin_width > 0.0, "g2.bin_width", "must be > 0")?;
        check(self.histogram_max_lag() > 0.0, "g2.histogram_max_lag", "must be > 0")?;
        check(self.tau_corr > 0.0, "g2.tau_corr", "must be > 0")?;
        if let Some(b) = &self.blinking {
            check(b.on_fraction > 0.0 && b.on_fraction <= 1.0, "g2.blinking.on_fraction", "must lie in (0, 1]")?;
            check(b.tau_blink > 0.0, "g2.blinking.tau_blink", "must be > 0")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LampConfig {
    pub tau_corr: f64,
    pub dt: f64,
    pub samples: usize,
    /// Lags of the correlation estimates, in units of `tau_corr`.
    pub max_lag_factor: f64,
    /// Leading samples of the field written to CSV.
    pub field_points: usize,
}

impl Default for LampConfig {
    fn default() -> Self {
        Self { tau_corr: LAMP_TAU_CORR, dt: LAMP_TAU_CORR / 20.0, samples: 1_000_000, max_lag_factor: 3.0, field_points: 20_000 }
    }
}

impl LampConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(self.tau_corr > 0.0 && self.tau_corr.is_finite(), "lamp.tau_corr", "must be > 0")?;
        check(self.dt > 0.0, "lamp.dt", "must be > 0")?;
        check(self.samples >= 2, "lamp.samples", "must be >= 2")?;
        check(self.max_lag_factor > 0.0, "lamp.max_lag_factor", "must be > 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub bin_width: f64,
    pub max_lag: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { bin_width: 0.1, max_lag: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagsConfig {
    pub rabi: f64,
    pub detuning: f64,
    pub statistics: LightStatistics,
    pub duration: f64,
    pub efficiency: f64,
    /// Apply per-detector jitter derived from the parameter set.
    pub jitter: bool,
    pub dead_time: f64,
    pub dark_rate: f64,
    pub blinking: Option<BlinkingConfig>,
    pub tau_corr: f64,
    pub histogram: Option<HistogramConfig>,
}

impl Default for TagsConfig {
    fn default() -> Self {
        Self {
            rabi: 1.7,
            detuning: 0.0,
            statistics: LightStatistics::Coherent,
            duration: 1.0e6,
            efficiency: 1.0,
            jitter: true,
            dead_time: 0.0,
            dark_rate: 0.0,
            blinking: None,
            tau_corr: LAMP_TAU_CORR,
            histogram: Some(HistogramConfig::default()),
        }
    }
}

impl TagsConfig {
    fn validate(&self) -> Result<(), CliError> {
        check(self.rabi >= 0.0 && self.rabi.is_finite(), "tags.rabi", "must be finite and >= 0")?;
        check(self.duration > 0.0 && self.duration.is_finite(), "tags.duration", "must be > 0")?;
        check(self.efficiency > 0.0 && self.efficiency <= 1.0, "tags.efficiency", "must lie in (0, 1]")?;
        check(self.dead_time >= 0.0, "tags.dead_time", "must be >= 0")?;
        check(self.dark_rate >= 0.0, "tags.dark_rate", "must be >= 0")?;
        check(self.tau_corr > 0.0, "tags.tau_corr", "must be > 0")?;
        if let Some(h) = &self.histogram {
            check(h.bin_width > 0.0 && h.max_lag > 0.0, "tags.histogram", "bin_width and max_lag must be > 0")?;
        }
        Ok(())
    }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}`: {msg}")))
    }
}

/// Recursively overlays `over` onto `base`. Objects merge key by key; any
/// other value replaces.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses a config document, reporting unknown keys and type errors with
/// their line and column.
pub fn parse_document(text: &str, origin: &str) -> Result<Value, CliError> {
    serde_json::from_str::<RunConfig>(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn load_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&text, &path.display().to_string())
}

/// Layers a preset (or the defaults) under an optional document.
pub fn resolve(preset: Option<Preset>, document: Option<Value>) -> Result<RunConfig, CliError> {
    let base = preset.map(Preset::config).unwrap_or_default();
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(doc) = document {
        merge(&mut value, doc);
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// Parameters resolved against the registry.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub set: ParameterSet,
    pub tls: TlsParams,
    pub instrument: InstrumentResponse,
}

impl RunConfig {
    pub fn resolve_parameters(&self) -> Result<Resolved, CliError> {
        let set = match &self.parameters {
            Parameters::Inline(set) => *set,
            Parameters::Named(name) => {
                let reg = match &self.registry {
                    Some(path) => Registry::load(path)
                        .map_err(|e| CliError::Config(format!("registry {}: {e}", path.display())))?,
                    None => Registry::builtin(),
                };
                *reg.get(name).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        let tls = set.tls().map_err(|e| CliError::Config(format!("`parameters`: {e}")))?;
        let instrument = set.instrument().map_err(|e| CliError::Config(format!("`parameters`: {e}")))?;
        Ok(Resolved { set, tls, instrument })
    }

    pub fn validate(&self, experiment: Experiment) -> Result<(), CliError> {
        match experiment {
            Experiment::Saturation => self.saturation.validate("saturation"),
            Experiment::Linewidth => self.linewidth.validate("linewidth"),
            Experiment::Rabi => self.rabi.validate(),
            Experiment::Mollow => self.mollow.validate(),
            Experiment::G2 => self.g2.validate(),
            Experiment::Lamp => self.lamp.validate(),
            Experiment::Tags => self.tags.validate(),
            Experiment::Validate => Ok(()),
        }
    }

    /// Applies `--samples` to the primary sample count of `experiment`.
    pub fn set_samples(&mut self, experiment: Experiment, n: usize, detected_rate: impl Fn(&RunConfig) -> f64) -> Result<(), CliError> {
        match experiment {
            Experiment::Saturation => self.saturation.points = n,
            Experiment::Linewidth => self.linewidth.points = n,
            Experiment::Rabi => self.rabi.samples = n,
            Experiment::Lamp => self.lamp.samples = n,
            Experiment::G2 | Experiment::Tags => {
                let rate = detected_rate(self);
                if !(rate > 0.0) {
                    return Err(CliError::Config("--samples needs a nonzero expected detection rate".into()));
                }
                let duration = n as f64 / rate;
                if experiment == Experiment::G2 {
                    self.g2.duration = duration;
                } else {
                    self.tags.duration = duration;
                }
            }
            Experiment::Mollow | Experiment::Validate => {
                log::warn!("--samples has no effect on this command");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_overrides_preset() {
        let doc = parse_document(r#"{"g2": {"rabi": 3.0}, "seed": 9}"#, "test").unwrap();
        let cfg = resolve(Some(Preset::FigS3), Some(doc)).unwrap();
        assert_eq!(cfg.g2.rabi, 3.0);
        assert_eq!(cfg.g2.bin_width, 20.0);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse_document("{\n  \"saturation\": {\"smin\": 1}\n}", "cfg.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("smin") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn sweep_hits_decades_exactly() {
        let s = SweepConfig::default().values();
        assert_eq!(s[0], 0.0);
        assert!(s.contains(&1.0));
        assert_eq!(s.len(), 42);
    }

    #[test]
    fn inline_parameters() {
        let doc = parse_document(
            r#"{"parameters": {"t1_ns": 1.0, "t2_ns": 2.0, "fpi_fwhm_ghz": 0.1, "detector_fwhm_ns": 0.3}}"#,
            "x",
        )
        .unwrap();
        let cfg = resolve(None, Some(doc)).unwrap();
        assert_eq!(cfg.resolve_parameters().unwrap().tls.t2(), 2.0);
    }
}
