mod common;

use fluxnoise::extract::{fit_model, fit_shared, Family, FitOptions};
use fluxnoise::models::{Phenomenological, SpectralModel};

fn perturbed(p: &Phenomenological) -> SpectralModel {
    SpectralModel::Phenomenological(Phenomenological {
        a: p.a * 2.0,
        alpha: 0.9,
        t_a_k: 0.04,
        b: p.b * 0.3,
        gamma: 2.4,
        t_b_k: 0.04,
    })
}

#[test]
fn two_term_recovery() {
    let truth = common::two_term(1.05, 3.0, 0.030, 0.055, 4e9);
    let model = SpectralModel::Phenomenological(truth.clone());
    let pts = common::noisy_points(&model, 0.1e9, 8e9, 30, 0.05, 5);
    let r = fit_model(&pts, Family::Phenomenological, &perturbed(&truth), &[false; 6], &FitOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.param("alpha").unwrap() - 1.05).abs() < 0.05);
    assert!((r.param("gamma").unwrap() - 3.0).abs() < 0.3);
}

#[test]
fn shared_exponent_four_temperatures() {
    let temps = [(0.030, 0.055), (0.050, 0.070), (0.080, 0.095), (0.120, 0.130)];
    let mut groups = Vec::new();
    let mut inits = Vec::new();
    for (i, &(ta, tb)) in temps.iter().enumerate() {
        let truth = common::two_term(1.05, 3.0, ta, tb, 4e9);
        groups.push(common::noisy_points(&SpectralModel::Phenomenological(truth.clone()), 0.1e9, 8e9, 30, 0.05, 100 + i as u64));
        inits.push(perturbed(&truth));
    }
    let r = fit_shared(&groups, Family::Phenomenological, &inits, &[false; 6], &["alpha", "gamma"], &FitOptions::default()).unwrap();
    let p0 = &r.params[0];
    assert!(r.converged);
    assert!((p0[1] - 1.05).abs() < 0.05);
    assert!((p0[4] - 3.0).abs() < 0.3);
    for p in &r.params {
        assert_eq!(p[1], p0[1]);
        assert_eq!(p[4], p0[4]);
    }
}
