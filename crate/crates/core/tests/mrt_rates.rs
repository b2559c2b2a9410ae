use fluxnoise::constants::K_B;
use fluxnoise::models::{Phenomenological, SpectralModel};
use fluxnoise::mrt::{
    build_kernel, gaussian_params, interpolated_spectrum, rate_full, rate_gaussian, rate_gaussian_broadened, MrtParams,
};
use fluxnoise::quad::{integrate, Tol};

/// Thermal 1/f noise restricted to frequencies far below W/h.
fn low_frequency(t_k: f64, f_h: f64) -> MrtParams {
    MrtParams {
        delta_over_h_hz: 0.5e6,
        ip_a: 0.5e-6,
        spectrum: SpectralModel::Phenomenological(Phenomenological {
            a: Phenomenological::a_from_amplitude(5e-6, 1.0, t_k),
            alpha: 1.0,
            t_a_k: t_k,
            b: 0.0,
            gamma: 1.0,
            t_b_k: t_k,
        }),
        f_l_hz: 1e-3,
        f_h_hz: f_h,
        f_l_epsilon_p_hz: None,
        sigma_quasistatic_j: 0.0,
    }
}

fn argmax(k: &fluxnoise::mrt::MrtKernel, lo: f64, hi: f64) -> (f64, f64) {
    // Golden-section search on a unimodal peak.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if k.rate(c) > k.rate(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    (x, k.rate(x))
}

#[test]
fn full_rate_matches_gaussian_for_low_frequency_noise() {
    let p = low_frequency(0.030, 1e6);
    let g = gaussian_params(&p).unwrap();
    let k = build_kernel(&p).unwrap();
    let (x, peak) = argmax(&k, g.epsilon_p_j - g.w_j, g.epsilon_p_j + g.w_j);
    let gpeak = rate_gaussian(p.delta_over_h_hz, g.w_j, g.epsilon_p_j, g.epsilon_p_j).unwrap();
    assert!((x - g.epsilon_p_j).abs() < 0.02 * g.w_j);
    assert!((peak / gpeak - 1.0).abs() < 0.05, "{peak} vs {gpeak}");
    // Half width at half maximum of a Gaussian is W√(2 ln 2).
    let half = 0.5 * peak;
    let (mut a, mut b) = (x, x + 5.0 * g.w_j);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if k.rate(m) > half {
            a = m;
        } else {
            b = m;
        }
    }
    let hwhm = a - x;
    assert!((hwhm / (g.w_j * (2.0 * 2f64.ln()).sqrt()) - 1.0).abs() < 0.05);
}

#[test]
fn detailed_balance() {
    let t = 0.030;
    let p = low_frequency(t, 1e6);
    let g = gaussian_params(&p).unwrap();
    let k = build_kernel(&p).unwrap();
    for i in 1..=8 {
        let e = 0.25 * i as f64 * g.w_j;
        let ratio = k.rate(e) / k.rate(-e);
        let expect = (e / (K_B * t)).exp();
        assert!((ratio / expect - 1.0).abs() < 0.03, "ε = {e:e}: {ratio} vs {expect}");
    }
}

#[test]
fn equilibrium_reorganization_energy() {
    let t = 0.050;
    let p = low_frequency(t, 1e7);
    let g = gaussian_params(&p).unwrap();
    let expect = g.w_j * g.w_j / (2.0 * K_B * t);
    assert!((g.epsilon_p_j / expect - 1.0).abs() < 0.02);
}

#[test]
fn rate_scales_with_splitting_squared() {
    let p = low_frequency(0.030, 1e6);
    let q = MrtParams {
        delta_over_h_hz: 3.0 * p.delta_over_h_hz,
        ..p.clone()
    };
    let g = gaussian_params(&p).unwrap();
    for e in [g.epsilon_p_j, g.epsilon_p_j + g.w_j] {
        let a = rate_full(&p, e).unwrap();
        let b = rate_full(&q, e).unwrap();
        assert!((b / a / 9.0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn quasistatic_convolution() {
    let p = low_frequency(0.030, 1e6);
    let g = gaussian_params(&p).unwrap();
    let sigma = 0.8 * g.w0_j;
    let broad = MrtParams {
        sigma_quasistatic_j: sigma,
        ..p.clone()
    };
    let k0 = build_kernel(&p).unwrap();
    let kb = build_kernel(&broad).unwrap();
    let tol = Tol::rel(1e-9);
    for j in -4..=4 {
        let e = g.epsilon_p_j + 0.5 * j as f64 * g.w0_j;
        let gauss = |x: f64| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let span = 8.0 * sigma;
        // Closed-form broadened Gaussian against direct convolution.
        let conv_g = integrate(
            |x| gauss(x) * rate_gaussian(p.delta_over_h_hz, g.w0_j, g.epsilon_p_j, e - x).unwrap(),
            -span,
            span,
            tol,
        )
        .value;
        let closed = rate_gaussian_broadened(p.delta_over_h_hz, g.w0_j, sigma, g.epsilon_p_j, e).unwrap();
        assert!((conv_g / closed - 1.0).abs() < 0.01);
        // Full rate with a quasistatic term against convolving the unbroadened full rate.
        let conv_f = integrate(|x| gauss(x) * k0.rate(e - x), -span, span, tol).value;
        let peak = kb.rate(g.epsilon_p_j);
        assert!((conv_f - kb.rate(e)).abs() < 0.01 * peak);
    }
}

#[test]
fn preset_insensitive_to_high_cutoff() {
    let p = interpolated_spectrum();
    let q = MrtParams {
        f_h_hz: 2.0 * p.f_h_hz,
        ..p.clone()
    };
    let g = gaussian_params(&p).unwrap();
    let kp = build_kernel(&p).unwrap();
    let kq = build_kernel(&q).unwrap();
    for j in -4..=4 {
        let e = g.epsilon_p_j + 0.5 * j as f64 * g.w_j;
        let (a, b) = (kp.rate(e), kq.rate(e));
        assert!((b / a - 1.0).abs() < 0.01, "ε offset {j}/2 W: {a} vs {b}");
    }
}
