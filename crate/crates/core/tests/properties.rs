use proptest::prelude::*;
use tlsim_core::bloch::{chaotic_steady_state, integrate, max_step, steady_state_population, BlochState};
use tlsim_core::emission::{lag_grid, qrt_g2, qrt_spectrum, FrequencyGrid};
use tlsim_core::export::{read_tags, write_tags};
use tlsim_core::params::omega_from_saturation;
use tlsim_core::photonstat::PhotonDistribution;
use tlsim_core::trajectory::{correlate, simulate_tags, Tag, TagStream, TrajectoryOptions};
use tlsim_core::{DrivePulse, LightStatistics, RngStream, TlsParams};

fn params() -> impl Strategy<Value = TlsParams> {
    (0.2f64..2.0, 0.05f64..=2.0).prop_map(|(t1, r)| TlsParams::new(t1, r * t1).unwrap())
}

fn tag_stream() -> impl Strategy<Value = TagStream> {
    prop::collection::vec((0.0f64..200.0, 1u8..=2), 2..300).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        TagStream::new(v.into_iter().map(|(time, channel)| Tag { time, channel }).collect(), 200.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bose_einstein_pmf_decreases(mean in 0.01f64..500.0) {
        let d = PhotonDistribution::bose_einstein(mean).unwrap();
        let mut prev = d.pmf(0);
        for n in 1..d.cutoff(1e-12).min(5000) {
            let p = d.pmf(n);
            prop_assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn bloch_evolution_stays_physical(p in params(), omega in 0.0f64..30.0, det in -10.0f64..10.0) {
        let pulse = DrivePulse::new(omega, det, tlsim_core::Envelope::continuous(), LightStatistics::Coherent).unwrap();
        let tr = integrate(&p, &pulse, 3.0, max_step(&p, omega.max(det.abs())), BlochState::ground()).unwrap();
        for s in &tr.samples {
            prop_assert!(s.is_physical(1e-9), "{s:?}");
        }
    }

    #[test]
    fn saturation_curves(p in params(), s in 1e-3f64..1e3) {
        let w = omega_from_saturation(s, &p);
        let coherent = steady_state_population(&p, w, 0.0);
        prop_assert!(((coherent - s / (2.0 * (1.0 + s))) / coherent).abs() < 1e-12);
        prop_assert!(chaotic_steady_state(&p, w, 0.0) < coherent);
    }

    #[test]
    fn resonant_spectrum_is_even_and_conserves_power(omega in 0.5f64..20.0) {
        let p = TlsParams::paper_qd();
        let grid = FrequencyGrid::symmetric(3.0, 0.01).unwrap();
        let spec = qrt_spectrum(&p, omega, 0.0, &grid).unwrap();
        let n = spec.incoherent.len();
        for i in 0..n / 2 {
            let (a, b) = (spec.incoherent[i], spec.incoherent[n - 1 - i]);
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
        }
        let want = steady_state_population(&p, omega, 0.0) / p.t1();
        prop_assert!(((spec.total_power() - want) / want).abs() < 1e-6);
    }

    #[test]
    fn g2_is_antibunched_and_nonnegative(p in params(), omega in 0.05f64..20.0, det in -5.0f64..5.0) {
        let g = qrt_g2(&p, omega, det, &lag_grid(5.0, 0.02).unwrap()).unwrap();
        prop_assert_eq!(g.value_at(0.0), Some(0.0));
        prop_assert!(g.values.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn correlator_matches_all_pairs(stream in tag_stream(), w in 0.2f64..3.0) {
        prop_assume!(stream.count(1) > 0 && stream.count(2) > 0);
        let h = correlate(&stream, w, 20.0).unwrap();
        let k_max = (20.0 / w).round() as i64;
        let mut naive = vec![0u64; (2 * k_max + 1) as usize];
        for a in stream.channel_times(1) {
            for b in stream.channel_times(2) {
                let k = ((b - a) / w + 0.5).floor() as i64;
                if k.abs() <= k_max {
                    naive[(k + k_max) as usize] += 1;
                }
            }
        }
        prop_assert_eq!(h.counts, naive);
    }

    #[test]
    fn tag_files_round_trip(stream in tag_stream()) {
        let mut buf = Vec::new();
        write_tags(&mut buf, &stream).unwrap();
        prop_assert_eq!(read_tags(buf.as_slice(), stream.duration()).unwrap(), stream);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn channels_split_fairly(seed in any::<u64>(), omega in 0.5f64..10.0) {
        let p = TlsParams::paper_qd();
        let pulse = DrivePulse::continuous(omega, LightStatistics::Coherent).unwrap();
        let s = simulate_tags(&p, &pulse, 2e4, &TrajectoryOptions::default(), &RngStream::new(seed)).unwrap();
        let n = s.len() as f64;
        prop_assert!((s.count(1) as f64 - s.count(2) as f64).abs() <= 4.0 * n.sqrt());
        prop_assert!(s.tags().windows(2).all(|w| w[1].time > w[0].time));
    }
}
