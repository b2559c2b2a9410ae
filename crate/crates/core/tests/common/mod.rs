#![allow(dead_code)]

use fluxnoise::extract::FitPoint;
use fluxnoise::models::{Phenomenological, SpectralModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Two-term model with the ohmic-like term equal to the 1/f term at `f_eq`.
pub fn two_term(alpha: f64, gamma: f64, t_a: f64, t_b: f64, f_eq: f64) -> Phenomenological {
    let a = Phenomenological::a_from_amplitude(5e-6, alpha, t_a);
    let unit_a = SpectralModel::Phenomenological(Phenomenological {
        a,
        alpha,
        t_a_k: t_a,
        b: 0.0,
        gamma,
        t_b_k: t_b,
    });
    let unit_b = SpectralModel::Phenomenological(Phenomenological {
        a: 0.0,
        alpha,
        t_a_k: t_a,
        b: 1.0,
        gamma,
        t_b_k: t_b,
    });
    let b = unit_a.s_plus(f_eq).unwrap() / unit_b.s_plus(f_eq).unwrap();
    Phenomenological {
        a,
        alpha,
        t_a_k: t_a,
        b,
        gamma,
        t_b_k: t_b,
    }
}

/// `n` log-spaced points in `[f_lo, f_hi]` with independent multiplicative
/// Gaussian noise of relative size `rel` on `S(+f)` and `S(-f)`.
pub fn noisy_points(model: &SpectralModel, f_lo: f64, f_hi: f64, n: usize, rel: f64, seed: u64) -> Vec<FitPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, rel).unwrap();
    (0..n)
        .map(|i| {
            let f = f_lo * (f_hi / f_lo).powf(i as f64 / (n - 1) as f64);
            let (sp, sm) = model.plus_minus(f).unwrap();
            let up = 0.5 * (sp + sm) * (1.0 + g.sample(&mut rng));
            let dn = 0.5 * (sp - sm) * (1.0 + g.sample(&mut rng));
            let (p, m) = (up + dn, up - dn);
            // Propagated errors of ln S⁺ and S⁻/S⁺ for independent relative errors on S(±f).
            let w_up = up / p;
            let w_dn = dn / p;
            let sig_ln = rel * (w_up * w_up + w_dn * w_dn).sqrt();
            let sig_ratio = 2.0 * rel * w_up * w_dn * 2f64.sqrt();
            FitPoint {
                f_hz: f,
                s_plus: p,
                s_minus: m,
                sigma_ln_s_plus: sig_ln,
                sigma_ratio: sig_ratio.max(1e-6),
            }
        })
        .collect()
}
