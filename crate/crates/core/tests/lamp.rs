use num_complex::Complex64;
use rustfft::FftPlanner;
use tlsim_core::lamp::{estimate_g1, estimate_g2, fit_gaussian_g2, synthesize_field, LAMP_TAU_CORR};
use tlsim_core::RngStream;

const TAU: f64 = LAMP_TAU_CORR;

#[test]
fn bunching_siegert_and_fit() {
    let field = synthesize_field(TAU, TAU / 20.0, 1_000_000, &mut RngStream::new(2)).unwrap();
    let g1 = estimate_g1(&field, 3.0 * TAU).unwrap();
    let g2 = estimate_g2(&field, 3.0 * TAU).unwrap();
    assert!((g2.values[0] - 2.0).abs() < 0.05, "{}", g2.values[0]);
    for (a, b) in g1.values.iter().zip(&g2.values) {
        assert!((b - 1.0 - a * a).abs() < 0.05);
    }
    let fit = fit_gaussian_g2(&g2).unwrap();
    assert!(fit.tau_identifiable);
    assert!((fit.tau_corr / TAU - 1.0).abs() < 0.05, "{}", fit.tau_corr);
}

/// Welch-averaged periodogram; returns (frequency step, power by FFT bin).
fn periodogram(a: &[Complex64], dt: f64, seg: usize) -> (f64, Vec<f64>) {
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut acc = vec![0.0; seg];
    for chunk in a.chunks_exact(seg) {
        let mut buf = chunk.to_vec();
        fft.process(&mut buf);
        for (p, x) in acc.iter_mut().zip(&buf) {
            *p += x.norm_sqr();
        }
    }
    (1.0 / (seg as f64 * dt), acc)
}

#[test]
fn field_spectrum_width() {
    let dt = TAU / 20.0;
    let field = synthesize_field(TAU, dt, 1 << 20, &mut RngStream::new(3)).unwrap();
    let seg = 4096;
    let (df, p) = periodogram(&field.amplitudes, dt, seg);
    // fold to |f| and smooth over 5 bins
    let half = seg / 2;
    let folded: Vec<f64> = (0..half).map(|k| if k == 0 { p[0] } else { 0.5 * (p[k] + p[seg - k]) }).collect();
    let smooth: Vec<f64> = (0..half - 2)
        .map(|k| {
            let lo = k.saturating_sub(2);
            folded[lo..k + 3].iter().sum::<f64>() / (k + 3 - lo) as f64
        })
        .collect();
    let peak = smooth[0];
    let k = smooth.iter().position(|&v| v < 0.5 * peak).unwrap();
    // linear interpolation of the half-maximum crossing
    let f = (k as f64 - 1.0 + (smooth[k - 1] - 0.5 * peak) / (smooth[k - 1] - smooth[k])) * df;
    let fwhm = 2.0 * f;
    let want = 0.664 / TAU;
    assert!((fwhm / want - 1.0).abs() < 0.1, "{fwhm} vs {want}");
}

fn spread(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[test]
fn standard_error_scales_as_inverse_root_length() {
    let dt = TAU / 20.0;
    let lag = TAU / 2.0;
    let estimate = |n: usize, seed: u64| {
        let f = synthesize_field(TAU, dt, n, &mut RngStream::new(seed)).unwrap();
        let g = estimate_g2(&f, lag).unwrap();
        *g.values.last().unwrap()
    };
    let runs = 96;
    let short: Vec<f64> = (0..runs).map(|s| estimate(50_000, 100 + s)).collect();
    let long: Vec<f64> = (0..runs).map(|s| estimate(100_000, 200 + s)).collect();
    let ratio = spread(&long) / spread(&short);
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.3, "{ratio}");
}
