//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on [0, 1] for the 15-point rule; odd indices are the
/// Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub abs_err: f64,
    pub converged: bool,
}

impl Quad {
    /// Converts an unconverged result into an error.
    pub fn require(self, what: &'static str, rel_tol: f64) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NonConvergence {
                what,
                achieved: self.abs_err / self.value.abs().max(f64::MIN_POSITIVE),
                requested: rel_tol,
            })
        }
    }
}

/// Nodes and weights of the 15-point Kronrod rule mapped to `[a, b]`.
pub fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 15];
    for j in 0..7 {
        out[2 * j] = (c - h * XGK[j], h * WGK[j]);
        out[2 * j + 1] = (c + h * XGK[j], h * WGK[j]);
    }
    out[14] = (c, h * WGK[7]);
    out
}

/// One 15-point Kronrod estimate with the embedded 7-point Gauss error.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    let val = k * h;
    let err = ((k - g) * h).abs();
    (val, err)
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_splits: usize,
}

impl Tol {
    pub fn rel(rel: f64) -> Self {
        Tol {
            abs: 0.0,
            rel,
            max_splits: 4000,
        }
    }
    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

/// Adaptive integral over consecutive panels `[p0,p1], [p1,p2], ...`.
///
/// The panel list is the initial partition; the segment with the largest
/// error is bisected until the summed error meets the tolerance.
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tol) -> Quad {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Seg {
            a: w[0],
            b: w[1],
            val: v,
            err: e,
        });
    }
    let mut splits = 0;
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target || !err.is_finite() {
            break;
        }
        if splits >= tol.max_splits {
            break;
        }
        let Some(s) = heap.pop() else { break };
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // Interval exhausted at machine precision; keep its estimate.
            heap.push(Seg { err: 0.0, ..s });
            err -= s.err;
            continue;
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Seg {
            a: s.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Seg {
            a: m,
            b: s.b,
            val: v2,
            err: e2,
        });
        splits += 1;
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let mut segs: Vec<Seg> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segs.iter().map(|s| s.val).sum();
    let abs_err: f64 = segs.iter().map(|s| s.err).sum();
    let converged = abs_err.is_finite() && abs_err <= tol.abs.max(tol.rel * value.abs()) * 1.000_001;
    Quad {
        value,
        abs_err,
        converged: converged || abs_err == 0.0,
    }
}

/// Adaptive integral over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Quad {
    integrate_panels(f, &[a, b], tol)
}

/// Integral over `[a, ∞)` through `x = a + scale·s/(1-s)`.
pub fn integrate_to_inf<F: FnMut(f64) -> f64>(mut f: F, a: f64, scale: f64, tol: Tol) -> Quad {
    let g = move |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        let x = a + scale * s / d;
        let v = scale * f(x) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_panels(g, &[0.0, 0.5, 0.9, 0.99, 1.0], tol)
}

/// Integral of `f` over `[a, b]` with `0 < a < b`, evaluated in `u = ln x`.
pub fn integrate_log<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tol) -> Quad {
    let (la, lb) = (a.ln(), b.ln());
    let n = ((lb - la) / std::f64::consts::LN_10).ceil().max(1.0) as usize;
    let pts: Vec<f64> = (0..=n)
        .map(|i| la + (lb - la) * i as f64 / n as f64)
        .collect();
    integrate_panels(
        |u| {
            let x = u.exp();
            f(x) * x
        },
        &pts,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        // The Kronrod rule is exact through degree 22.
        let (v, _) = gk15(&mut |x: f64| x.powi(10), 0.0, 1.0);
        assert!((v - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_singularity() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tol::rel(1e-10));
        assert!((q.value - 2.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn semi_infinite_gaussian() {
        let q = integrate_to_inf(|x: f64| (-x * x).exp(), 0.0, 1.0, Tol::rel(1e-12));
        assert!((q.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
        assert!(q.converged);
    }

    #[test]
    fn log_variable_one_over_x() {
        let q = integrate_log(|x: f64| 1.0 / x, 1e-5, 1e10, Tol::rel(1e-12));
        assert!((q.value - 15.0 * std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_with_panels() {
        let pts: Vec<f64> = (0..=80).map(|i| i as f64 * 0.25).collect();
        let q = integrate_panels(
            |x: f64| (2.0 * std::f64::consts::PI * x).cos() * (-0.1 * x).exp(),
            &pts,
            Tol::rel(1e-12),
        );
        // ∫0^20 cos(2πx) e^{-0.1x} dx
        let k = 2.0 * std::f64::consts::PI;
        let exact = (0.1 - (-2.0f64).exp() * 0.1) / (0.01 + k * k);
        assert!((q.value - exact).abs() < 1e-12, "{} vs {}", q.value, exact);
    }
}
