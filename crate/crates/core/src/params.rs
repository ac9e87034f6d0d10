//! Emitter parameters, instrument responses and the named parameter-set
//! registry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the built-in parameter set measured on the quantum dot.
pub const PAPER_QD: &str = "paper-qd";

/// Lifetimes of the two-level emitter.
///
/// `t1` is the population (radiative) lifetime and `t2` the coherence time,
/// both in ns. Physicality requires `t2 <= 2 * t1`, i.e. a non-negative pure
/// dephasing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    t1: f64,
    t2: f64,
}

impl TlsParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t1 > 0.0) {
            return Err(Error::param("t1", format!("must be finite and > 0, got {t1}")));
        }
        if !(t2.is_finite() && t2 > 0.0) {
            return Err(Error::param("t2", format!("must be finite and > 0, got {t2}")));
        }
        if t2 > 2.0 * t1 * (1.0 + 1e-12) {
            return Err(Error::param(
                "t2",
                format!("coherence time {t2} ns exceeds 2*T1 = {} ns", 2.0 * t1),
            ));
        }
        Ok(Self { t1, t2: t2.min(2.0 * t1) })
    }

    /// T1 = 0.641 ns, T2 = 0.325 ns.
    pub fn paper_qd() -> Self {
        Self { t1: 0.641, t2: 0.325 }
    }

    /// Radiatively limited emitter, T2 = 2 T1.
    pub fn radiative(t1: f64) -> Result<Self> {
        Self::new(t1, 2.0 * t1)
    }

    #[inline]
    pub fn t1(&self) -> f64 {
        self.t1
    }

    #[inline]
    pub fn t2(&self) -> f64 {
        self.t2
    }

    /// Population decay rate 1/T1 [rad/ns].
    #[inline]
    pub fn gamma(&self) -> f64 {
        1.0 / self.t1
    }

    /// Coherence decay rate 1/T2 [rad/ns].
    #[inline]
    pub fn coherence_rate(&self) -> f64 {
        1.0 / self.t2
    }

    /// Pure-dephasing rate 1/T2 - 1/(2 T1), clamped at zero.
    #[inline]
    pub fn pure_dephasing_rate(&self) -> f64 {
        (1.0 / self.t2 - 0.5 / self.t1).max(0.0)
    }
}

impl Default for TlsParams {
    fn default() -> Self {
        Self::paper_qd()
    }
}

/// Instrument responses: Lorentzian FWHM of the scanning Fabry-Perot [GHz]
/// and Gaussian FWHM of the two-detector timing response [ns].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResponse {
    fpi_fwhm: f64,
    detector_fwhm: f64,
}

impl InstrumentResponse {
    pub fn new(fpi_fwhm: f64, detector_fwhm: f64) -> Result<Self> {
        if !(fpi_fwhm.is_finite() && fpi_fwhm > 0.0) {
            return Err(Error::param("fpi_fwhm", format!("must be > 0, got {fpi_fwhm}")));
        }
        if !(detector_fwhm.is_finite() && detector_fwhm > 0.0) {
            return Err(Error::param(
                "detector_fwhm",
                format!("must be > 0, got {detector_fwhm}"),
            ));
        }
        Ok(Self { fpi_fwhm, detector_fwhm })
    }

    /// 175.4 MHz Fabry-Perot resolution, 351 ps HBT timing resolution.
    pub fn paper_setup() -> Self {
        Self { fpi_fwhm: 0.1754, detector_fwhm: 0.351 }
    }

    /// Lorentzian FWHM in GHz.
    pub fn fpi_fwhm(&self) -> f64 {
        self.fpi_fwhm
    }

    /// Combined (pair) Gaussian FWHM in ns.
    pub fn detector_fwhm(&self) -> f64 {
        self.detector_fwhm
    }

    /// Gaussian jitter FWHM of a single detector such that the difference of
    /// two independent detectors has the combined FWHM.
    pub fn per_detector_fwhm(&self) -> f64 {
        self.detector_fwhm / std::f64::consts::SQRT_2
    }
}

impl Default for InstrumentResponse {
    fn default() -> Self {
        Self::paper_setup()
    }
}

/// Saturation parameter S = Ω² T1 T2.
pub fn saturation_parameter(omega: f64, params: &TlsParams) -> f64 {
    omega * omega * params.t1() * params.t2()
}

/// Rabi frequency that produces saturation parameter `s`.
pub fn omega_from_saturation(s: f64, params: &TlsParams) -> f64 {
    (s.max(0.0) / (params.t1() * params.t2())).sqrt()
}

/// Power-broadened FWHM (2/T2)·√(1 + Ω² T1 T2) in rad/ns.
pub fn power_linewidth(omega: f64, params: &TlsParams) -> f64 {
    2.0 / params.t2() * (1.0 + saturation_parameter(omega, params)).sqrt()
}

/// One entry of the parameter-set registry, in its JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub t1_ns: f64,
    pub t2_ns: f64,
    pub fpi_fwhm_ghz: f64,
    pub detector_fwhm_ns: f64,
}

impl ParameterSet {
    pub fn tls(&self) -> Result<TlsParams> {
        TlsParams::new(self.t1_ns, self.t2_ns)
    }

    pub fn instrument(&self) -> Result<InstrumentResponse> {
        InstrumentResponse::new(self.fpi_fwhm_ghz, self.detector_fwhm_ns)
    }

    fn validate(&self) -> Result<()> {
        self.tls()?;
        self.instrument()?;
        Ok(())
    }
}

/// Named parameter sets. Always contains `paper-qd` unless explicitly
/// overridden by a loaded document.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    sets: BTreeMap<String, ParameterSet>,
}

impl Registry {
    pub fn builtin() -> Self {
        let mut sets = BTreeMap::new();
        sets.insert(
            PAPER_QD.to_string(),
            ParameterSet {
                t1_ns: 0.641,
                t2_ns: 0.325,
                fpi_fwhm_ghz: 0.1754,
                detector_fwhm_ns: 0.351,
            },
        );
        Self { sets }
    }

    /// Parses a JSON object mapping names to parameter sets and merges it
    /// over the built-in registry.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: BTreeMap<String, ParameterSet> = serde_json::from_str(text)?;
        let mut reg = Self::builtin();
        for (name, set) in parsed {
            set.validate()?;
            reg.sets.insert(name, set);
        }
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn get(&self, name: &str) -> Result<&ParameterSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::UnknownParameterSet(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.sets)?)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rabi_frequencies_are_angular() {
        let p = TlsParams::paper_qd();
        assert_relative_eq!(saturation_parameter(1.7, &p), 0.602, max_relative = 1e-3);
        assert_relative_eq!(saturation_parameter(7.1, &p), 10.50, max_relative = 1e-3);
        assert_eq!(saturation_parameter(0.0, &p), 0.0);
        // Reading the quoted "GHz" as ordinary frequency would give S ≈ 23.8 at 1.7.
        let ordinary = saturation_parameter(crate::to_angular(1.7), &p);
        assert!(ordinary > 20.0);
    }

    #[test]
    fn inverse_saturation() {
        let p = TlsParams::paper_qd();
        assert_relative_eq!(omega_from_saturation(0.602, &p), 1.700, max_relative = 1e-3);
        assert_relative_eq!(omega_from_saturation(10.50, &p), 7.100, max_relative = 1e-3);
        assert_eq!(omega_from_saturation(0.0, &p), 0.0);
    }

    #[test]
    fn linewidth_law() {
        let p = TlsParams::paper_qd();
        assert_eq!(power_linewidth(0.0, &p), 2.0 / 0.325);
        assert_relative_eq!(crate::to_ghz(power_linewidth(0.0, &p)), 0.979, max_relative = 1e-3);
        let w1 = omega_from_saturation(1.0, &p);
        assert_relative_eq!(power_linewidth(w1, &p), 8.703, max_relative = 1e-3);
        assert_relative_eq!(power_linewidth(7.1, &p), 20.87, max_relative = 1e-3);
    }

    #[test]
    fn rejects_unphysical_lifetimes() {
        assert!(TlsParams::new(0.0, 0.1).is_err());
        assert!(TlsParams::new(1.0, -0.1).is_err());
        assert!(TlsParams::new(1.0, 2.5).is_err());
        assert!(TlsParams::new(1.0, 2.0).is_ok());
        assert_eq!(TlsParams::radiative(1.0).unwrap().pure_dephasing_rate(), 0.0);
        assert!(InstrumentResponse::new(0.0, 0.351).is_err());
    }

    #[test]
    fn registry_json() {
        let doc = r#"{"narrow": {"t1_ns": 1.0, "t2_ns": 2.0, "fpi_fwhm_ghz": 0.1, "detector_fwhm_ns": 0.05}}"#;
        let reg = Registry::from_json(doc).unwrap();
        assert_eq!(reg.get("narrow").unwrap().tls().unwrap().t2(), 2.0);
        let qd = reg.get(PAPER_QD).unwrap();
        assert_eq!(qd.tls().unwrap(), TlsParams::paper_qd());
        assert_eq!(qd.instrument().unwrap(), InstrumentResponse::paper_setup());
        assert!(matches!(reg.get("nope"), Err(Error::UnknownParameterSet(_))));

        let unknown_key = r#"{"x": {"t1_ns": 1.0, "t2_ns": 1.0, "fpi_fwhm_ghz": 0.1, "detector_fwhm_ns": 0.05, "t3": 1}}"#;
        assert!(Registry::from_json(unknown_key).is_err());
        let bad = r#"{"x": {"t1_ns": 1.0, "t2_ns": 3.0, "fpi_fwhm_ghz": 0.1, "detector_fwhm_ns": 0.05}}"#;
        assert!(Registry::from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn saturation_round_trip(s in 1e-6f64..1e4, t1 in 0.1f64..5.0, ratio in 0.05f64..2.0) {
            let p = TlsParams::new(t1, ratio * t1).unwrap();
            let back = saturation_parameter(omega_from_saturation(s, &p), &p);
            prop_assert!(((back - s) / s).abs() < 1e-12);
        }

        #[test]
        fn linewidth_monotone(a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let p = TlsParams::paper_qd();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(power_linewidth(lo, &p) <= power_linewidth(hi, &p));
        }
    }
}
