//! Nelder–Mead simplex minimization with dimension-adaptive coefficients.

/// Stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Relative spread of simplex values.
    pub f_tol: f64,
    /// Largest vertex distance from the best vertex.
    pub x_tol: f64,
    /// Initial simplex step per coordinate.
    pub step: f64,
    /// Fresh-simplex restarts after convergence.
    pub restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 20_000,
            f_tol: 1e-12,
            x_tol: 1e-9,
            step: 0.25,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One simplex run from `x0`.
fn nm_once<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opt: &NmOptions, budget: usize) -> NmResult {
    let n = x0.len();
    if n == 0 {
        let v = sanitize(f(x0));
        return NmResult {
            x: vec![],
            f: v,
            evals: 1,
            converged: true,
        };
    }
    let nf = n as f64;
    let (ra, ex, co, sh) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opt.step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();
    let mut evals = n + 1;
    let mut converged = false;
    while evals < budget {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opt.f_tol * (vals[0].abs() + 1e-300) + 1e-300 && size <= opt.x_tol {
            converged = true;
            break;
        }
        if size <= 1e-15 {
            converged = spread.is_finite();
            break;
        }

        let mut cen = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in cen.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> { cen.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(ra);
        let fr = sanitize(f(&xr));
        evals += 1;
        if fr < vals[0] {
            let xe = along(ra * ex);
            let fe = sanitize(f(&xe));
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(ra * co);
            let fc = sanitize(f(&xc));
            (xc, fc)
        } else {
            let xc = along(-co);
            let fc = sanitize(f(&xc));
            (xc, fc)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, v)| b + sh * (v - b)).collect();
            vals[i] = sanitize(f(&p));
            pts[i] = p;
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    NmResult {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged,
    }
}

/// Minimizes `f` from `x0`, restarting from the best point until a restart
/// no longer improves the value.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opt: &NmOptions) -> NmResult {
    let mut best = nm_once(&mut f, x0, opt, opt.max_evals);
    let mut total = best.evals;
    for _ in 0..opt.restarts {
        if total >= opt.max_evals {
            break;
        }
        let mut o = *opt;
        o.step = opt.step * 0.1;
        let r = nm_once(&mut f, &best.x, &o, opt.max_evals - total);
        total += r.evals;
        let improved = r.f < best.f - opt.f_tol * best.f.abs();
        if r.f <= best.f {
            best = NmResult {
                evals: total,
                ..r
            };
        }
        if !improved {
            break;
        }
    }
    best.evals = total;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &NmOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn quadratic_six_dims() {
        let c = [1.0, -2.0, 3.0, 0.5, -0.25, 2.0];
        let r = nelder_mead(
            |x| x.iter().zip(&c).enumerate().map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2)).sum(),
            &[0.0; 6],
            &NmOptions::default(),
        );
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_treated_as_infinite() {
        let r = nelder_mead(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) },
            &[1.0],
            &NmOptions::default(),
        );
        assert!((r.x[0] - 2.0).abs() < 1e-6);
    }
}
