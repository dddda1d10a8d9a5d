//! Closed-form figures of merit from fitted rates and device geometry.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v:e}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be non-negative and finite, got {v:e}")))
    }
}

/// `C = 4 g^2 / (kappa_r kappa_m)`; all rates in the same units.
pub fn cooperativity(g: f64, kappa_r: f64, kappa_m: f64) -> Result<f64> {
    positive("kappa_r", kappa_r)?;
    positive("kappa_m", kappa_m)?;
    if !g.is_finite() {
        return Err(Error::domain("coupling must be finite"));
    }
    Ok(4.0 * g * g / (kappa_r * kappa_m))
}

/// Single-spin coupling in rad/s: `g_e mu_B b_rf omega_r / sqrt(8 hbar Z_r)`
/// with the field per unit current `b_rf = mu0 / (2 w)` above a wire of width `w`.
pub fn estimate_single_spin_coupling(
    omega_r: f64,
    z_r: f64,
    wire_width: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("z_r", z_r)?;
    positive("wire_width", wire_width)?;
    let b_rf = consts.mu0() / (2.0 * wire_width);
    Ok(consts.g_e() * consts.mu_b() * b_rf * omega_r / (8.0 * consts.hbar() * z_r).sqrt())
}

/// Collective coupling `g_s sqrt(N)`.
pub fn estimate_collective_coupling(g_s: f64, n_spins: f64) -> Result<f64> {
    non_negative("single-spin coupling", g_s)?;
    non_negative("spin count", n_spins)?;
    Ok(g_s * n_spins.sqrt())
}

/// Mean excitation number `4 P Q_l^2 / (hbar omega_res^2 |Q_c|)` for drive power `power_w`.
pub fn photon_number(
    power_w: f64,
    q_loaded: f64,
    q_coupling_abs: f64,
    omega_res: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    non_negative("drive power", power_w)?;
    positive("Q_l", q_loaded)?;
    positive("|Q_c|", q_coupling_abs)?;
    positive("omega_res", omega_res)?;
    Ok(4.0 * power_w * q_loaded * q_loaded / (consts.hbar() * omega_res * omega_res * q_coupling_abs))
}

/// Precession cone angle `2 sqrt(n_m / N)` in radians.
pub fn cone_angle(n_magnons: f64, n_spins: f64) -> Result<f64> {
    non_negative("magnon number", n_magnons)?;
    positive("spin count", n_spins)?;
    Ok(2.0 * (n_magnons / n_spins).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{dbm_to_watts, ghz_to_angular, mhz_to_angular};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn cooperativity_of_both_devices() {
        let c = cooperativity(mhz_to_angular(90.31), mhz_to_angular(0.902), mhz_to_angular(30.62)).unwrap();
        assert!((c - 1181.0).abs() < 1.0, "{c}");
        let c = cooperativity(mhz_to_angular(147.21), mhz_to_angular(7.917), mhz_to_angular(117.7)).unwrap();
        assert!((c - 93.0).abs() < 0.1, "{c}");
        assert_eq!(cooperativity(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(cooperativity(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_spin_coupling_limits() {
        let k = PhysicalConstants::default();
        let gs = estimate_single_spin_coupling(ghz_to_angular(3.6), 17.0, 10e-6, &k).unwrap() / TAU;
        assert!(gs > 35.0 && gs < 36.0, "{gs}");
        let double = estimate_single_spin_coupling(ghz_to_angular(7.2), 17.0, 10e-6, &k).unwrap() / TAU;
        assert!((double - 2.0 * gs).abs() < 1e-12 * gs);
        let wide = estimate_single_spin_coupling(ghz_to_angular(3.6), 17.0, 1e9, &k).unwrap();
        assert!(wide < 1e-9);
        assert!(estimate_single_spin_coupling(1.0, 0.0, 1.0, &k).is_err());
    }

    #[test]
    fn collective_coupling() {
        let g = estimate_collective_coupling(36.0, 2.195e12).unwrap();
        assert!(g > 53e6 && g < 54e6);
        assert_eq!(estimate_collective_coupling(36.0, 0.0).unwrap(), 0.0);
        assert_eq!(estimate_collective_coupling(36.0, 1.0).unwrap(), 36.0);
    }

    #[test]
    fn photon_numbers() {
        let k = PhysicalConstants::default();
        let p = dbm_to_watts(-75.0);
        let n = photon_number(p, 4302.0, 11200.0, ghz_to_angular(3.604), &k).unwrap();
        assert!((n / 3.9e6 - 1.0).abs() < 0.05, "{n}");
        let n = photon_number(p, 242.1, 23000.0, ghz_to_angular(3.669), &k).unwrap();
        assert!((n / 5800.0 - 1.0).abs() < 0.05, "{n}");
        assert_eq!(photon_number(0.0, 1.0, 1.0, 1.0, &k).unwrap(), 0.0);
    }

    #[test]
    fn cone_angles() {
        let t = cone_angle(2900.0, 2.195e12).unwrap();
        assert!((t / 7.2e-5 - 1.0).abs() < 0.02, "{t}");
        assert_eq!(cone_angle(0.0, 5.0).unwrap(), 0.0);
        assert!((cone_angle(25.0, 100.0).unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cooperativity_scaling_invariance(g in 1e3f64..1e9, kr in 1e3f64..1e8, km in 1e3f64..1e9, s in 0.01f64..100.0) {
            let a = cooperativity(g, kr, km).unwrap();
            let b = cooperativity(s * g, s * s * kr, km).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}
