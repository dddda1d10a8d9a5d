use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::MagnonParams;

/// Dipole-exchange frequency for an in-plane field with exchange field `exch` (T).
fn in_plane_frequency(gamma: f64, b0: f64, mu0_meff: f64, exch: f64) -> f64 {
    gamma * ((b0 + exch) * (b0 + mu0_meff + exch)).sqrt()
}

/// Uniform (Kittel) mode for a field along the long axis of an in-plane film.
pub fn kittel_frequency(b0: f64, magnon: &MagnonParams) -> Result<f64> {
    if !(b0 >= 0.0) {
        return Err(Error::domain(format!("field must be non-negative, got {b0} T")));
    }
    Ok(in_plane_frequency(magnon.gamma, b0, magnon.mu0_meff, 0.0))
}

/// `k_n = n pi / L`.
pub fn thickness_wavevector(n: usize, thickness: f64) -> Result<f64> {
    if !(thickness > 0.0) {
        return Err(Error::domain(format!("film thickness must be positive, got {thickness} m")));
    }
    Ok(n as f64 * PI / thickness)
}

/// Thickness-quantized dipole-exchange spin wave of index `n`; `n = 0` is the Kittel mode.
pub fn exchange_mode_frequency(n: usize, b0: f64, magnon: &MagnonParams) -> Result<f64> {
    let k = thickness_wavevector(n, magnon.thickness)?;
    if !(b0 >= 0.0) {
        return Err(Error::domain(format!("field must be non-negative, got {b0} T")));
    }
    if n == 0 {
        return kittel_frequency(b0, magnon);
    }
    let exch = magnon.mu0_meff * magnon.lambda_ex_sq * k * k;
    Ok(in_plane_frequency(magnon.gamma, b0, magnon.mu0_meff, exch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn film(mu0_meff: f64, lambda_ex_sq: f64) -> MagnonParams {
        MagnonParams {
            gamma: TAU * 28e9,
            mu0_meff,
            lambda_ex_sq,
            thickness: 300e-9,
            kappa_m: TAU * 30.62e6,
            ms_field: 0.01,
            volume: 1.08e-15,
            n_spins: 2.195e12,
        }
    }

    #[test]
    fn kittel_zero_field() {
        assert_eq!(kittel_frequency(0.0, &film(0.053614, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn kittel_reference_value() {
        // 28 GHz/T * sqrt(0.1034 * 0.157014) = 3.56771... GHz (hand-evaluated)
        let f = kittel_frequency(0.1034, &film(0.053614, 0.0)).unwrap() / TAU / 1e9;
        assert!((f - 3.5677).abs() < 1e-4, "{f}");
        let exact = 28.0 * (0.1034f64 * (0.1034 + 0.053614)).sqrt();
        assert!((f - exact).abs() < 1e-12);
    }

    #[test]
    fn kittel_isotropic_limit_is_larmor() {
        let m = film(0.0, 0.0);
        let w = kittel_frequency(0.25, &m).unwrap();
        assert!((w - m.gamma * 0.25).abs() <= 1e-6 * w);
    }

    #[test]
    fn kittel_rejects_negative_field() {
        assert!(kittel_frequency(-1e-3, &film(0.05, 0.0)).is_err());
    }

    #[test]
    fn kittel_monotonic() {
        let m = film(0.0537, 0.0);
        let mut last = 0.0;
        for i in 1..200 {
            let w = kittel_frequency(i as f64 * 1e-3, &m).unwrap();
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn mode_zero_is_kittel() {
        let m = film(0.0537, 0.25e-16);
        for b in [0.0, 0.05, 0.103, 0.3] {
            assert_eq!(
                exchange_mode_frequency(0, b, &m).unwrap(),
                kittel_frequency(b, &m).unwrap()
            );
        }
    }

    #[test]
    fn first_exchange_mode_shift() {
        let m = film(0.0537, 0.25e-16);
        let k1 = PI / 300e-9;
        let exch = 0.0537 * 0.25e-16 * k1 * k1;
        assert!((exch - 0.147e-3).abs() < 0.001e-3, "{exch}");
        let b = 0.103;
        let oracle = m.gamma * ((b + exch) * (b + 0.0537 + exch)).sqrt();
        let w1 = exchange_mode_frequency(1, b, &m).unwrap();
        assert!((w1 - oracle).abs() <= 1e-12 * oracle);
        assert!(w1 > kittel_frequency(b, &m).unwrap());
    }

    #[test]
    fn exchange_free_modes_are_degenerate() {
        let m = film(0.0537, 0.0);
        let w0 = kittel_frequency(0.1, &m).unwrap();
        for n in 1..6 {
            assert_eq!(exchange_mode_frequency(n, 0.1, &m).unwrap(), w0);
        }
    }

    #[test]
    fn zero_thickness_is_domain_error() {
        let mut m = film(0.05, 1e-17);
        m.thickness = 0.0;
        assert!(exchange_mode_frequency(1, 0.1, &m).is_err());
    }
}
