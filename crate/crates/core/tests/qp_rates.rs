use fluxnoise::circuit::{qubit_observables, solve, CircuitParams, Grid};
use fluxnoise::constants::{H, HBAR, K_B};
use fluxnoise::qp::{
    fitted_density_preset, qp_density, qp_rates, qp_spectral_density, thermal_x_qp_asymptotic, Occupation, QpParams,
    DEFAULT_DOS_TIMES_GAP_PER_M3, DEFAULT_GAP_J, DEFAULT_NEAR_GAP_PATCH,
};
use fluxnoise::quad::{integrate_to_inf, Tol};

fn thermal(t: f64) -> QpParams {
    QpParams {
        gap_j: DEFAULT_GAP_J,
        e_j1_j: 1e-22,
        e_j2_j: 1e-22,
        occupation: Occupation::Thermal { t_qp_k: t },
        dos_ef_per_j_m3: DEFAULT_DOS_TIMES_GAP_PER_M3 / DEFAULT_GAP_J,
        near_gap_patch: DEFAULT_NEAR_GAP_PATCH,
    }
}

/// `K1(a) = ∫₀^∞ e^{-a cosh t} cosh t dt`.
fn bessel_k1(a: f64) -> f64 {
    integrate_to_inf(|t: f64| (-a * t.cosh()).exp() * t.cosh(), 0.0, 1.0, Tol::rel(1e-12)).value
}

#[test]
fn detailed_balance_thermal() {
    for t in [0.05, 0.1, 0.15] {
        let p = thermal(t);
        for f in [1e9, 3e9, 6e9] {
            let w = 2.0 * std::f64::consts::PI * f;
            let ratio = qp_spectral_density(&p, 1, -w).unwrap() / qp_spectral_density(&p, 1, w).unwrap();
            let expect = (-HBAR * w / (K_B * t)).exp();
            assert!((ratio / expect - 1.0).abs() < 1e-6, "T={t} f={f}: {ratio} vs {expect}");
        }
    }
}

#[test]
fn thermal_density_matches_bessel_form() {
    // Boltzmann tail: x_qp = 2·K1(Δ/k_BT). The near-gap density of states
    // below x = 1e-3 carries a relative error of order x there.
    for t in [0.04, 0.1, 0.15] {
        let got = qp_density(&thermal(t)).unwrap().x_qp;
        let exact = 2.0 * bessel_k1(DEFAULT_GAP_J / (K_B * t));
        assert!((got / exact - 1.0).abs() < 2e-4, "T={t}: {got} vs {exact}");
    }
}

#[test]
fn thermal_density_low_temperature_limit() {
    let t = 0.04;
    let got = qp_density(&thermal(t)).unwrap().x_qp;
    let asym = thermal_x_qp_asymptotic(DEFAULT_GAP_J, t);
    assert!((got / asym - 1.0).abs() < 0.01);
}

#[test]
fn near_gap_patch_insensitive() {
    let p = thermal(0.1);
    let q = QpParams {
        near_gap_patch: 2.0 * DEFAULT_NEAR_GAP_PATCH,
        ..p.clone()
    };
    let w = 2.0 * std::f64::consts::PI * 2e9;
    for sign in [1.0, -1.0] {
        let a = qp_spectral_density(&p, 1, sign * w).unwrap();
        let b = qp_spectral_density(&q, 1, sign * w).unwrap();
        assert!((a / b - 1.0).abs() < 1e-3);
    }
    let a = qp_density(&p).unwrap().x_qp;
    let b = qp_density(&q).unwrap().x_qp;
    assert!((a / b - 1.0).abs() < 1e-3);
}

#[test]
fn rates_linear_in_dilute_occupation() {
    let xs: Vec<f64> = (0..60).map(|i| 0.002 * i as f64).collect();
    let base: Vec<f64> = xs.iter().map(|x| 1e-6 * (-x / 0.02f64).exp()).collect();
    let mk = |scale: f64| QpParams {
        occupation: Occupation::Tabulated {
            x_over_gap: xs.clone(),
            occupation: base.iter().map(|v| v * scale).collect(),
        },
        ..thermal(0.1)
    };
    let a = qp_rates(&mk(1.0), [0.3, 0.2], 3e9).unwrap();
    let b = qp_rates(&mk(2.0), [0.3, 0.2], 3e9).unwrap();
    assert!((b.gamma_down_hz / a.gamma_down_hz / 2.0 - 1.0).abs() < 1e-3);
    assert!((b.gamma_up_hz / a.gamma_up_hz / 2.0 - 1.0).abs() < 1e-3);
}

fn sweep_rates(p: &QpParams) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..16 {
        let beta = 0.9 + 0.025 * i as f64;
        let c = CircuitParams {
            l_h: 600e-12,
            c_f: 100e-15,
            beta_max: 2.5,
            phi_ba: (beta / 2.5f64).acos() / std::f64::consts::PI,
            phi_t: 0.0,
            grid: Grid::default(),
        };
        let o = qubit_observables(&solve(&c, 2).unwrap(), &c).unwrap();
        let r = qp_rates(p, o.sin_half, o.f10_hz).unwrap();
        out.push((o.f10_hz, r.t1_s.unwrap(), r.p_stray.unwrap()));
    }
    out
}

#[test]
fn fitted_density_curves() {
    let p = fitted_density_preset().unwrap();
    let x = qp_density(&p).unwrap().x_qp;
    assert!((x / 1.3e-6 - 1.0).abs() < 1e-6);
    let rows: Vec<_> = sweep_rates(&p).into_iter().filter(|r| r.0 > 0.3e9 && r.0 < 4e9).collect();
    assert!(rows.len() >= 4);
    // Sweep runs toward lower f10: T1 must shorten at every step.
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1);
    }
    // Stray population against a 30 mK equilibrium curve.
    let mut worst: f64 = 0.0;
    for &(f, _, ps) in &rows {
        let eq = 1.0 / (1.0 + (H * f / (K_B * 0.030)).exp());
        worst = worst.max(ps - eq);
        let t_eff = H * f / (K_B * ((1.0 - ps) / ps).ln());
        assert!(t_eff > 0.09, "{f}: {t_eff}");
    }
    assert!(worst > 0.1);
}
