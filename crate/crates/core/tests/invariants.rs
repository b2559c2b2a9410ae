use fluxnoise::circuit::asymmetry_crosstalk;
use fluxnoise::constants::{H, K_B};
use fluxnoise::detector::simulate_shots;
use fluxnoise::extract::{rates_from_spectra, spectra_from_relaxation, QubitOperatingPoint};
use fluxnoise::io::{read_timeseries_csv, write_timeseries_csv};
use fluxnoise::models::{Phenomenological, SpectralModel};
use fluxnoise::mrt::rate_gaussian;
use fluxnoise::qp::{fitted_density_preset, qp_rates, Occupation};
use fluxnoise::synth::{generate_power_law, PowerLawSpec, TimeSeries};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_temperature_spectrum_obeys_detailed_balance(
        alpha in 0.5f64..1.5,
        gamma in 0.5f64..3.5,
        t_k in 0.01f64..0.2,
        log_f in 3.0f64..10.0,
    ) {
        let m = SpectralModel::Phenomenological(Phenomenological {
            a: 1e-12, alpha, t_a_k: t_k, b: 1e-30, gamma, t_b_k: t_k,
        });
        let f = 10f64.powf(log_f);
        let sp = m.two_sided(f).unwrap();
        let sm = m.two_sided(-f).unwrap();
        let x = H * f / (K_B * t_k);
        prop_assume!(x < 600.0);
        prop_assert!(rel(sp / sm, x.exp()) < 1e-9);
        let (plus, minus) = m.plus_minus(f).unwrap();
        prop_assert!(plus >= minus.abs());
    }

    #[test]
    fn relaxation_round_trip(
        f10 in 1e8f64..1e10,
        t1 in 1e-7f64..1e-3,
        p in 0.0f64..0.49,
        ip in 1e-8f64..1e-6,
    ) {
        let l = 6e-10;
        let pt = QubitOperatingPoint { f10_hz: f10, t1_s: t1, p_stray: p, matrix_element_wb: ip * l, l_h: l };
        let s = spectra_from_relaxation(&pt).unwrap();
        let r = rates_from_spectra(&s, pt.matrix_element_wb, l);
        prop_assert!(rel(r.t1(), t1) < 1e-12);
        prop_assert!((r.p_stray() - p).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_offset_slope_is_transfer(d in -0.3f64..0.3, phi_ba in -0.45f64..0.45) {
        let h = 1e-6;
        let a = asymmetry_crosstalk(d, phi_ba - h).unwrap().tilt_offset_phi0;
        let b = asymmetry_crosstalk(d, phi_ba + h).unwrap().tilt_offset_phi0;
        let t = asymmetry_crosstalk(d, phi_ba).unwrap().transfer;
        prop_assert!(((b - a) / (2.0 * h) - t).abs() < 1e-6 * (1.0 + t.abs()));
    }

    #[test]
    fn crosstalk_is_odd_in_asymmetry_and_advances_per_period(d in 0.001f64..0.9, phi_ba in -3.0f64..3.0) {
        let p = asymmetry_crosstalk(d, phi_ba).unwrap();
        let n = asymmetry_crosstalk(-d, phi_ba).unwrap();
        prop_assert!((p.tilt_offset_phi0 + n.tilt_offset_phi0).abs() < 1e-12);
        prop_assert!((p.transfer + n.transfer).abs() < 1e-12);
        let q = asymmetry_crosstalk(d, phi_ba + 2.0).unwrap();
        prop_assert!((q.tilt_offset_phi0 - p.tilt_offset_phi0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_rate_symmetric_about_peak(w in 1e-27f64..1e-24, ep in -1e-24f64..1e-24, x in 0.0f64..3.0) {
        let a = rate_gaussian(5e5, w, ep, ep + x * w).unwrap();
        let b = rate_gaussian(5e5, w, ep, ep - x * w).unwrap();
        prop_assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn timeseries_csv_round_trip(xs in prop::collection::vec(-1e3f64..1e3, 2..64), dt_exp in -8.0f64..-2.0) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ts.csv");
        let dt = 10f64.powf(dt_exp);
        let ts = TimeSeries::new(xs, dt).unwrap();
        write_timeseries_csv(&p, &ts).unwrap();
        let back = read_timeseries_csv(&p).unwrap();
        prop_assert_eq!(back.samples, ts.samples);
        prop_assert!(rel(back.dt, dt) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesis_and_shots_are_seed_deterministic(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let spec = PowerLawSpec { amplitude_at_1hz: 1e-5, alpha, f_min_hz: 0.0, seed, oversample_factor: 2 };
        let a = generate_power_law(&spec, 512, 1e-4).unwrap();
        let b = generate_power_law(&spec, 512, 1e-4).unwrap();
        prop_assert_eq!(&a, &b);
        let sa = simulate_shots(&a, 2000.0, seed).unwrap();
        let sb = simulate_shots(&b, 2000.0, seed).unwrap();
        prop_assert_eq!(&sa.shots, &sb.shots);
        prop_assert!(sa.shots.shots.iter().all(|&s| s == 1 || s == -1));
    }

    #[test]
    fn thermal_quasiparticles_obey_detailed_balance(f10 in 5e8f64..1.5e10, t_k in 0.1f64..0.25) {
        let mut p = fitted_density_preset().unwrap();
        p.occupation = Occupation::Thermal { t_qp_k: t_k };
        let r = qp_rates(&p, [0.3, 0.2], f10).unwrap();
        let want = (-H * f10 / (K_B * t_k)).exp();
        prop_assert!(rel(r.gamma_up_hz / r.gamma_down_hz, want) < 1e-6);
    }
}
