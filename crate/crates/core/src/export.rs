//! CSV writers for every result type, plus the tag-file JSON sidecar.
//!
//! Floats use Rust's shortest round-trip formatting, so identical results
//! always produce identical bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochTrace, ChaoticTransient};
use crate::emission::{EmissionG2, Spectrum};
use crate::error::{Error, Result};
use crate::lamp::{CorrelationCurve, FieldTrace};
use crate::trajectory::{CoincidenceHistogram, Tag, TagStream};

pub fn write_trace(w: &mut impl Write, trace: &BlochTrace) -> Result<()> {
    writeln!(w, "t_ns,rho11,rho01_re,rho01_im")?;
    for (t, s) in trace.times().zip(&trace.samples) {
        writeln!(w, "{t},{},{},{}", s.rho11, s.rho01_re, s.rho01_im)?;
    }
    Ok(())
}

/// Chaotic-ensemble mean trace with the standard error of the population.
pub fn write_transient(w: &mut impl Write, tr: &ChaoticTransient) -> Result<()> {
    writeln!(w, "t_ns,rho11,rho01_re,rho01_im,stderr")?;
    for ((t, s), e) in tr.mean.times().zip(&tr.mean.samples).zip(&tr.stderr) {
        writeln!(w, "{t},{},{},{},{e}", s.rho11, s.rho01_re, s.rho01_im)?;
    }
    Ok(())
}

pub fn write_field(w: &mut impl Write, field: &FieldTrace) -> Result<()> {
    writeln!(w, "t_ns,re,im,intensity")?;
    for (k, a) in field.amplitudes.iter().enumerate() {
        writeln!(w, "{},{},{},{}", k as f64 * field.dt, a.re, a.im, a.norm_sqr())?;
    }
    Ok(())
}

pub fn write_correlation(w: &mut impl Write, curve: &CorrelationCurve) -> Result<()> {
    writeln!(w, "lag_ns,value")?;
    for (l, v) in curve.lags.iter().zip(&curve.values) {
        writeln!(w, "{l},{v}")?;
    }
    Ok(())
}

/// Bare incoherent density of `raw` next to the full density of
/// `after_irf`, which must share its grid.
pub fn write_spectrum(w: &mut impl Write, raw: &Spectrum, after_irf: &Spectrum) -> Result<()> {
    if raw.grid != after_irf.grid {
        return Err(Error::param("spectrum", "raw and convolved spectra must share a grid"));
    }
    writeln!(w, "freq_ghz,incoherent,total_after_irf")?;
    for ((f, a), b) in raw.freqs().iter().zip(&raw.incoherent).zip(after_irf.total_density()) {
        writeln!(w, "{f},{a},{b}")?;
    }
    Ok(())
}

pub fn write_g2(w: &mut impl Write, g2: &EmissionG2) -> Result<()> {
    writeln!(w, "lag_ns,g2")?;
    for (l, v) in g2.lags.iter().zip(&g2.values) {
        writeln!(w, "{l},{v}")?;
    }
    Ok(())
}

pub fn write_tags(w: &mut impl Write, stream: &TagStream) -> Result<()> {
    writeln!(w, "time_ns,channel")?;
    for t in stream.tags() {
        writeln!(w, "{},{}", t.time, t.channel)?;
    }
    Ok(())
}

/// Parses a tag file written by [`write_tags`].
pub fn read_tags(r: impl BufRead, duration: f64) -> Result<TagStream> {
    let mut tags = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "time_ns,channel" {
                return Err(Error::param("tag file", format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::param("tag file", format!("line {}: cannot parse {line:?}", i + 1));
        let (t, c) = line.split_once(',').ok_or_else(bad)?;
        tags.push(Tag {
            time: t.trim().parse().map_err(|_| bad())?,
            channel: c.trim().parse().map_err(|_| bad())?,
        });
    }
    TagStream::new(tags, duration)
}

/// Metadata stored next to a tag file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSidecar {
    pub duration_ns: f64,
    pub seed: u64,
    pub t1_ns: f64,
    pub t2_ns: f64,
    pub rabi_rad_per_ns: f64,
    pub detuning_rad_per_ns: f64,
    pub statistics: String,
    pub efficiency: f64,
    pub jitter_fwhm_per_detector_ns: f64,
    pub blinking_on_fraction: Option<f64>,
    pub tau_blink_ns: Option<f64>,
    pub n_channel1: usize,
    pub n_channel2: usize,
}

pub fn write_histogram(w: &mut impl Write, hist: &CoincidenceHistogram) -> Result<()> {
    writeln!(w, "lag_ns,counts,c_norm")?;
    for ((l, c), n) in hist.lags.iter().zip(&hist.counts).zip(&hist.c_norm) {
        writeln!(w, "{l},{c},{n}")?;
    }
    Ok(())
}

/// Rows of (S, coherent ρ11, chaotic ρ11).
pub fn write_saturation(w: &mut impl Write, rows: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(w, "s,coherent,chaotic")?;
    for (s, a, b) in rows {
        writeln!(w, "{s},{a},{b}")?;
    }
    Ok(())
}

/// Rows of (S, FWHM in rad/ns).
pub fn write_linewidth(w: &mut impl Write, rows: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "s,fwhm_rad_per_ns,fwhm_ghz")?;
    for (s, f) in rows {
        writeln!(w, "{s},{f},{}", crate::to_ghz(*f))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::trajectory::poisson_stream;

    #[test]
    fn tags_round_trip() {
        let mut rng = RngStream::new(1);
        let s = poisson_stream(0.1, 1000.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_tags(&mut buf, &s).unwrap();
        let back = read_tags(buf.as_slice(), 1000.0).unwrap();
        assert_eq!(back, s);
        assert!(read_tags("time,channel\n".as_bytes(), 1.0).is_err());
        assert!(read_tags("time_ns,channel\n0.5,x\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn headers() {
        let mut buf = Vec::new();
        write_saturation(&mut buf, &[(1.0, 0.25, 0.2)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,coherent,chaotic\n1,0.25,0.2\n");
        let mut buf = Vec::new();
        let g = EmissionG2 { lags: vec![-1.0, 0.0, 1.0], values: vec![0.5, 0.0, 0.5], valid_max_lag: None };
        write_g2(&mut buf, &g).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lag_ns,g2\n-1,0.5\n0,0\n"));
    }
}
