//! Physical constants (exact 2019 SI values) and small thermal helpers.

use std::f64::consts::PI;

/// Planck constant, J·s.
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = H / (2.0 * PI);
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Magnetic flux quantum h/2e, Wb.
pub const PHI0: f64 = H / (2.0 * E_CHARGE);
/// One electron-volt in joules.
pub const EV: f64 = E_CHARGE;

/// Beyond this magnitude `coth(x)` is returned as `±1`.
const COTH_SATURATION: f64 = 40.0;

/// `coth(x)`, stable near zero and saturated for large `|x|`.
pub fn coth(x: f64) -> f64 {
    if x.abs() > COTH_SATURATION {
        return x.signum();
    }
    if x.abs() < 1e-4 {
        // Laurent series; the cubic term is below round-off here.
        return 1.0 / x + x / 3.0;
    }
    // coth(x) = 1 + 2/(e^{2x} - 1)
    1.0 + 2.0 / (2.0 * x).exp_m1()
}

/// `1 + coth(x)` written as `2 / (1 - e^{-2x})`.
///
/// This form stays accurate on both signs of `x`; for large negative `x` it
/// decays as `-2 e^{2x}` instead of cancelling to zero.
pub fn one_plus_coth(x: f64) -> f64 {
    2.0 / -(-2.0 * x).exp_m1()
}

/// `tanh(h f / 2 k_B T)`; the ratio `S⁻/S⁺` of an equilibrium bath.
pub fn thermal_tanh(f_hz: f64, t_k: f64) -> f64 {
    (H * f_hz / (2.0 * K_B * t_k)).tanh()
}

/// Angular frequency for a frequency in Hz.
#[inline]
pub fn omega(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        assert!((PHI0 - 2.067_833_848e-15).abs() < 1e-23);
    }

    #[test]
    fn one_plus_coth_matches_direct_form() {
        for &x in &[-3.0f64, -0.7, -1e-3, 2e-3, 0.4, 1.0, 5.0, 17.0] {
            let direct = 1.0 + x.cosh() / x.sinh();
            let stable = one_plus_coth(x);
            assert!(((direct - stable) / direct).abs() < 1e-12, "x = {x}");
        }
        // Deep negative side: 1 + coth(x) = -2e^{2x}/(1 - e^{2x}).
        for &x in &[-8.0f64, -12.0, -30.0] {
            let e = (2.0 * x).exp();
            let expect = -2.0 * e / (1.0 - e);
            assert!(((one_plus_coth(x) - expect) / expect).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn coth_small_and_saturated() {
        assert!((coth(1e-6) - (1e6 + 1e-6 / 3.0)).abs() / 1e6 < 1e-15);
        assert_eq!(coth(45.0), 1.0);
        assert_eq!(coth(-45.0), -1.0);
        assert!((coth(0.5) - 0.5f64.cosh() / 0.5f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn fdt_arithmetic_at_one_ghz() {
        // h·1e9 / (2 k_B · 30 mK) = 0.79988...
        let t = thermal_tanh(1e9, 0.03);
        assert!((t - 0.6640).abs() < 5e-5);
    }
}
