//! Single-mode fluxmon circuit on a flux grid.
//!
//! With `x = Φ/Φ0` and `E_L = (Φ0/2π)²/L` the Hamiltonian is
//!
//! `H = -(ħ²/2CΦ0²) d²/dx² + E_L (2π(x - x_t))²/2 + β E_L cos(2πx)`,
//!
//! i.e. the junction phase is `φ̂ = 2πx + π`, so at zero tilt the potential
//! is a single well for `β < 1` and a symmetric double well for `β > 1`.
//! `β = β_max cos(πΦ_ba/Φ0)`.
//!
//! Three-point differences on a uniform grid with Dirichlet edges give an
//! `O(dx²)` error; energies and matrix elements are Richardson-extrapolated
//! from grids with `n` and `2n - 1` points.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{H, HBAR, PHI0};
use crate::error::{check_positive, invalid, Error, Result};

/// Flux grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_points: usize,
    pub half_width_phi0: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_points: 2001,
            half_width_phi0: 1.2,
        }
    }
}

/// Circuit and bias parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub l_h: f64,
    pub c_f: f64,
    pub beta_max: f64,
    /// Barrier bias, Φ0.
    pub phi_ba: f64,
    /// Tilt bias, Φ0.
    pub phi_t: f64,
    #[serde(default)]
    pub grid: Grid,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("l_h", self.l_h)?;
        check_positive("c_f", self.c_f)?;
        check_positive("beta_max", self.beta_max)?;
        if !self.phi_ba.is_finite() || !self.phi_t.is_finite() {
            return Err(invalid("phi_ba", "biases must be finite"));
        }
        if self.grid.n_points < 201 || self.grid.n_points % 2 == 0 {
            return Err(invalid("grid.n_points", format!("must be odd and >= 201, got {}", self.grid.n_points)));
        }
        check_positive("grid.half_width_phi0", self.grid.half_width_phi0)?;
        Ok(())
    }

    /// `β_max cos(πΦ_ba/Φ0)`.
    pub fn beta(&self) -> f64 {
        beta_of(self.beta_max, self.phi_ba)
    }

    /// Inductive energy `(Φ0/2π)²/L`, J.
    pub fn e_l(&self) -> f64 {
        (PHI0 / (2.0 * PI)).powi(2) / self.l_h
    }

    /// Potential at `x` (Φ0), J.
    pub fn potential(&self, x: f64) -> f64 {
        let d = 2.0 * PI * (x - self.phi_t);
        self.e_l() * (0.5 * d * d + self.beta() * (2.0 * PI * x).cos())
    }
}

/// `β(Φ_ba) = β_max cos(πΦ_ba/Φ0)`.
pub fn beta_of(beta_max: f64, phi_ba: f64) -> f64 {
    beta_max * (PI * phi_ba).cos()
}

/// Symmetric tridiagonal matrix: diagonal `d`, off-diagonal `e[i]` coupling `i, i+1`.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl Tridiag {
    /// Number of eigenvalues strictly below `lam` (Sturm sequence).
    pub fn count_below(&self, lam: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.d.len() {
            let off = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] };
            q = self.d[i] - lam - if i == 0 { 0.0 } else { off / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + lam.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - lam) y = b` with partial pivoting.
    fn solve_shifted(&self, lam: f64, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        // Rows hold up to three upper entries after pivoting.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut perm = vec![false; n];
        let mut rhs = b.to_vec();
        let tiny = 1e-300;
        // Current row i: [a_i, c_i, 0] with sub-diagonal of next row.
        let mut a = self.d[0] - lam;
        let mut c = if n > 1 { self.e[0] } else { 0.0 };
        let mut z = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < tiny { tiny } else { a };
                break;
            }
            let s = self.e[i];
            let an = self.d[i + 1] - lam;
            let cn = if i + 2 < n { self.e[i + 1] } else { 0.0 };
            if a.abs() >= s.abs() {
                let piv = if a.abs() < tiny { tiny } else { a };
                let m = s / piv;
                u0[i] = piv;
                u1[i] = c;
                u2[i] = z;
                l[i] = m;
                a = an - m * c;
                c = cn - m * z;
                z = 0.0;
            } else {
                perm[i] = true;
                let m = a / s;
                u0[i] = s;
                u1[i] = an;
                u2[i] = cn;
                l[i] = m;
                let na = c - m * an;
                let nc = z - m * cn;
                a = na;
                c = nc;
                z = 0.0;
            }
        }
        // Forward elimination on the right-hand side.
        for i in 0..n.saturating_sub(1) {
            if perm[i] {
                rhs.swap(i, i + 1);
            }
            let v = rhs[i];
            rhs[i + 1] -= l[i] * v;
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = rhs[i];
            if i + 1 < n {
                v -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                v -= u2[i] * y[i + 2];
            }
            y[i] = v / u0[i];
        }
        y
    }

    /// Eigenvector for eigenvalue `lam` by inverse iteration, orthogonalized
    /// against `prev` and normalized to unit Euclidean norm.
    pub fn eigenvector(&self, lam: f64, prev: &[Vec<f64>]) -> Vec<f64> {
        let n = self.d.len();
        let scale = self.d.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        let shift = lam + 1e-13 * scale;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 97) as f64 / 97.0).collect();
        for _ in 0..4 {
            orthogonalize(&mut v, prev);
            normalize(&mut v);
            v = self.solve_shifted(shift, &v);
        }
        orthogonalize(&mut v, prev);
        normalize(&mut v);
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn orthogonalize(v: &mut [f64], prev: &[Vec<f64>]) {
    for p in prev {
        let c = dot(v, p);
        v.iter_mut().zip(p).for_each(|(x, y)| *x -= c * y);
    }
}

/// Eigenstates on one grid. Energies in GHz (E/h); states normalized so
/// `Σ ψ² dx = 1` with `dx` in Φ0.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub x: Vec<f64>,
    pub dx: f64,
    pub energies_ghz: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl GridSolution {
    /// `⟨i|g(x)|j⟩ = Σ ψ_i g ψ_j dx`.
    pub fn element(&self, i: usize, j: usize, g: impl Fn(f64) -> f64) -> f64 {
        self.x
            .iter()
            .zip(&self.states[i])
            .zip(&self.states[j])
            .map(|((x, a), b)| a * g(*x) * b)
            .sum::<f64>()
            * self.dx
    }
}

/// Lowest levels of the circuit with extrapolated energies.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Extrapolated energies, J, ascending.
    pub energies_j: Vec<f64>,
    pub coarse: GridSolution,
    pub fine: GridSolution,
}

fn solve_grid(p: &CircuitParams, n: usize, levels: usize) -> Result<GridSolution> {
    let w = p.grid.half_width_phi0;
    let dx = 2.0 * w / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| -w + i as f64 * dx).collect();
    let to_ghz = 1.0 / (H * 1e9);
    let t = HBAR * HBAR / (2.0 * p.c_f * PHI0 * PHI0) * to_ghz / (dx * dx);
    let u: Vec<f64> = x.iter().map(|&xi| p.potential(xi) * to_ghz).collect();
    let mut pairs: Vec<(f64, Vec<f64>)> = if p.phi_t == 0.0 {
        solve_by_parity(&u, t, levels)
    } else {
        let tri = Tridiag {
            d: u.iter().map(|v| v + 2.0 * t).collect(),
            e: vec![-t; n - 1],
        };
        let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
        for k in 0..levels {
            let lam = tri.eigenvalue(k);
            let prev: Vec<Vec<f64>> = out.iter().map(|(_, v)| v.clone()).collect();
            let v = tri.eigenvector(lam, &prev);
            out.push((lam, v));
        }
        out
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(levels);
    let norm = 1.0 / dx.sqrt();
    let mut states = Vec::new();
    let mut energies = Vec::new();
    for (e, mut v) in pairs {
        // Fix the overall sign: first significant lobe positive.
        let peak = v.iter().map(|a| a.abs()).fold(0.0, f64::max);
        let first = v.iter().find(|a| a.abs() > 1e-3 * peak).copied().unwrap_or(1.0);
        if first < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        let edge = v[0].abs().max(v[n - 1].abs());
        if edge > 1e-6 * peak {
            return Err(invalid(
                "grid.half_width_phi0",
                format!("grid too narrow: boundary amplitude {:.2e} of peak", edge / peak),
            ));
        }
        v.iter_mut().for_each(|a| *a *= norm);
        energies.push(e);
        states.push(v);
    }
    Ok(GridSolution {
        x,
        dx,
        energies_ghz: energies,
        states,
    })
}

/// Even and odd sectors of a potential symmetric about the grid center.
fn solve_by_parity(u: &[f64], t: f64, levels: usize) -> Vec<(f64, Vec<f64>)> {
    let n = u.len();
    let c = n / 2;
    let m = n - c; // center plus one side
    // Even: ψ_{c-i} = ψ_{c+i}; scaling the center by √2 symmetrizes the block.
    let even = Tridiag {
        d: (0..m).map(|i| u[c + i] + 2.0 * t).collect(),
        e: (0..m - 1).map(|i| if i == 0 { -t * 2f64.sqrt() } else { -t }).collect(),
    };
    // Odd: ψ_c = 0.
    let odd = Tridiag {
        d: (1..m).map(|i| u[c + i] + 2.0 * t).collect(),
        e: vec![-t; m - 2],
    };
    let mut out = Vec::new();
    for (tri, is_even) in [(even, true), (odd, false)] {
        let mut prev: Vec<Vec<f64>> = Vec::new();
        for k in 0..levels.min(tri.d.len()) {
            let lam = tri.eigenvalue(k);
            let h = tri.eigenvector(lam, &prev);
            prev.push(h.clone());
            let mut full = vec![0.0; n];
            if is_even {
                full[c] = h[0] * 2f64.sqrt();
                for i in 1..m {
                    full[c + i] = h[i];
                    full[c - i] = h[i];
                }
            } else {
                for i in 1..m {
                    full[c + i] = h[i - 1];
                    full[c - i] = -h[i - 1];
                }
            }
            normalize(&mut full);
            out.push((lam, full));
        }
    }
    out
}

/// Lowest `n_levels` eigenstates.
pub fn solve(p: &CircuitParams, n_levels: usize) -> Result<EigenSolution> {
    p.validate()?;
    if n_levels < 1 {
        return Err(invalid("n_levels", "must be >= 1"));
    }
    let n = p.grid.n_points;
    let coarse = solve_grid(p, n, n_levels)?;
    let fine = solve_grid(p, 2 * n - 1, n_levels)?;
    let energies_j = coarse
        .energies_ghz
        .iter()
        .zip(&fine.energies_ghz)
        .map(|(c, f)| (4.0 * f - c) / 3.0 * H * 1e9)
        .collect();
    Ok(EigenSolution {
        energies_j,
        coarse,
        fine,
    })
}

/// Qubit-level quantities derived from the two lowest states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitObservables {
    pub f10_hz: f64,
    /// Tunnel splitting, `√(f10² - (2I_pΦ_t/h)²)`; equals `f10` at zero tilt.
    pub delta_over_h_hz: f64,
    /// `|⟨0|Φ̂|1⟩|`, Wb.
    pub matrix_element_wb: f64,
    pub ip_a: f64,
    /// `|⟨0|sin(φ̂_j/2)|1⟩|` for `φ̂_{1,2} = φ̂ ∓ πΦ_ba/Φ0`.
    pub sin_half: [f64; 2],
    /// `⟨0|Φ̂|0⟩` and `⟨1|Φ̂|1⟩`, Φ0.
    pub diag_flux_phi0: [f64; 2],
}

fn richardson(c: f64, f: f64) -> f64 {
    (4.0 * f - c) / 3.0
}

/// Relative level spacing below which the two lowest levels count as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;

pub fn qubit_observables(sol: &EigenSolution, p: &CircuitParams) -> Result<QubitObservables> {
    if sol.energies_j.len() < 2 {
        return Err(invalid("n_levels", "need at least two levels"));
    }
    let (e0, e1) = (sol.energies_j[0], sol.energies_j[1]);
    let f10 = (e1 - e0) / H;
    if !(e1 - e0 > DEGENERACY_TOL * e0.abs().max(e1.abs())) {
        return Err(Error::NonConvergence {
            what: "level splitting (degenerate levels)",
            achieved: (e1 - e0).abs() / e0.abs().max(e1.abs()),
            requested: DEGENERACY_TOL,
        });
    }
    let ext = |g: &dyn Fn(f64) -> f64, i: usize, j: usize| -> f64 {
        richardson(sol.coarse.element(i, j, g).abs(), sol.fine.element(i, j, g).abs())
    };
    let m_phi0 = ext(&|x| x, 0, 1);
    let m_wb = m_phi0 * PHI0;
    let ip = m_wb / p.l_h;
    let off = PI * p.phi_ba;
    let s1 = ext(&|x| ((2.0 * PI * x + PI - off) / 2.0).sin(), 0, 1);
    let s2 = ext(&|x| ((2.0 * PI * x + PI + off) / 2.0).sin(), 0, 1);
    let d0 = sol.fine.element(0, 0, |x| x);
    let d1 = sol.fine.element(1, 1, |x| x);
    let eps = 2.0 * ip * p.phi_t * PHI0 / H;
    let delta = (f10 * f10 - eps * eps).max(0.0).sqrt();
    Ok(QubitObservables {
        f10_hz: f10,
        delta_over_h_hz: delta,
        matrix_element_wb: m_wb,
        ip_a: ip,
        sin_half: [s1, s2],
        diag_flux_phi0: [d0, d1],
    })
}

/// Tilt offset and differential transfer from junction asymmetry `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crosstalk {
    /// Φ0.
    pub tilt_offset_phi0: f64,
    pub transfer: f64,
}

/// `offset = (Φ0/2π)·atan(d·tan(πΦ_ba/Φ0))` on the branch continuous in
/// `Φ_ba`, and `transfer = (d/2)/(d² sin² + cos²)`.
pub fn asymmetry_crosstalk(d: f64, phi_ba: f64) -> Result<Crosstalk> {
    if !(d.abs() < 1.0) {
        return Err(invalid("d", format!("|d| must be < 1, got {d}")));
    }
    if !phi_ba.is_finite() {
        return Err(invalid("phi_ba", "must be finite"));
    }
    let th = PI * phi_ba;
    let (s, c) = th.sin_cos();
    let offset = if d == 0.0 {
        0.0
    } else {
        let g = (d.abs() * s).atan2(c);
        let k = ((th - g) / (2.0 * PI)).round();
        d.signum() * (g + 2.0 * PI * k) / (2.0 * PI)
    };
    let transfer = 0.5 * d / (d * d * s * s + c * c);
    Ok(Crosstalk {
        tilt_offset_phi0: offset,
        transfer,
    })
}

/// One row of a barrier-bias sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub phi_ba_phi0: f64,
    pub beta: f64,
    pub f10_hz: f64,
    pub ip_a: f64,
    pub matrix_element_wb: f64,
    pub sin_half_1: f64,
    pub sin_half_2: f64,
}

/// Observables over a list of barrier biases, in input order.
pub fn sweep_barrier(p: &CircuitParams, phi_ba: &[f64]) -> Result<Vec<SweepRow>> {
    phi_ba
        .par_iter()
        .map(|&b| {
            let q = CircuitParams { phi_ba: b, ..*p };
            let sol = solve(&q, 2)?;
            let o = qubit_observables(&sol, &q)?;
            Ok(SweepRow {
                phi_ba_phi0: b,
                beta: q.beta(),
                f10_hz: o.f10_hz,
                ip_a: o.ip_a,
                matrix_element_wb: o.matrix_element_wb,
                sin_half_1: o.sin_half[0],
                sin_half_2: o.sin_half[1],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta_max: f64, phi_ba: f64, phi_t: f64) -> CircuitParams {
        CircuitParams {
            l_h: 600e-12,
            c_f: 100e-15,
            beta_max,
            phi_ba,
            phi_t,
            grid: Grid::default(),
        }
    }

    #[test]
    fn sturm_on_known_matrix() {
        // Path-graph Laplacian eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 50;
        let t = Tridiag {
            d: vec![2.0; n],
            e: vec![-1.0; n - 1],
        };
        for k in 0..5 {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * PI / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k) - exact).abs() < 1e-13);
        }
        let lam = t.eigenvalue(2);
        let v = t.eigenvector(lam, &[]);
        let r: f64 = (0..n)
            .map(|i| {
                let mut tv = 2.0 * v[i];
                if i > 0 {
                    tv -= v[i - 1];
                }
                if i + 1 < n {
                    tv -= v[i + 1];
                }
                (tv - lam * v[i]).powi(2)
            })
            .sum();
        assert!(r.sqrt() < 1e-10);
    }

    #[test]
    fn harmonic_limit() {
        let p = params(2.5, 0.5, 0.0);
        assert!(p.beta().abs() < 1e-15);
        let sol = solve(&p, 3).unwrap();
        let f10 = (sol.energies_j[1] - sol.energies_j[0]) / H;
        let exact = 1.0 / (2.0 * PI * (600e-12f64 * 100e-15).sqrt());
        assert!((f10 / exact - 1.0).abs() < 1e-6, "{f10} vs {exact}");
        assert!((exact / 20.547e9 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn f10_decreases_with_beta() {
        let mut last = f64::INFINITY;
        for i in 0..6 {
            let beta = 0.15 * i as f64;
            let phi_ba = (beta / 2.5).acos() / PI;
            let p = params(2.5, phi_ba, 0.0);
            let o = qubit_observables(&solve(&p, 2).unwrap(), &p).unwrap();
            assert!(o.f10_hz < last);
            last = o.f10_hz;
        }
    }

    #[test]
    fn double_well_parity_and_persistent_current() {
        let phi_ba = (1.3f64 / 2.5).acos() / PI;
        let p = params(2.5, phi_ba, 0.0);
        let sol = solve(&p, 2).unwrap();
        let o = qubit_observables(&sol, &p).unwrap();
        assert!(o.diag_flux_phi0[0].abs() < 1e-8);
        assert!(o.diag_flux_phi0[1].abs() < 1e-8);
        assert!(o.ip_a > 0.1e-6 && o.ip_a < 5e-6, "{}", o.ip_a);
    }

    #[test]
    fn grid_refinement_converged() {
        for (phi_ba, phi_t) in [(0.5, 0.0), ((1.3f64 / 2.5).acos() / PI, 0.0), (0.3, 0.002)] {
            let p = params(2.5, phi_ba, phi_t);
            let q = CircuitParams {
                grid: Grid {
                    n_points: 2 * p.grid.n_points - 1,
                    ..p.grid
                },
                ..p
            };
            let a = solve(&p, 2).unwrap();
            let b = solve(&q, 2).unwrap();
            for k in 0..2 {
                let rel = (a.energies_j[k] / b.energies_j[k] - 1.0).abs();
                assert!(rel < 1e-8, "E{k}: {rel:e}");
            }
            let fa = qubit_observables(&a, &p).unwrap().f10_hz;
            let fb = qubit_observables(&b, &q).unwrap().f10_hz;
            assert!((fa / fb - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn crosstalk_values() {
        let c = asymmetry_crosstalk(0.01, 0.4).unwrap();
        let direct = (0.01 * (0.4 * PI).tan()).atan() / (2.0 * PI);
        assert!((c.tilt_offset_phi0 - direct).abs() < 1e-15);
        assert!((c.tilt_offset_phi0 - 4.897e-3).abs() < 1e-6);
        let z = asymmetry_crosstalk(0.0, 0.3).unwrap();
        assert_eq!(z.tilt_offset_phi0, 0.0);
        assert_eq!(z.transfer, 0.0);
        let t = asymmetry_crosstalk(0.01, 0.0).unwrap();
        assert!((t.transfer - 0.005).abs() < 1e-15);
        assert!(asymmetry_crosstalk(1.0, 0.1).is_err());
    }
}
