//! Conversions between the internal SI/angular convention and reporting units.
//!
//! Internally every frequency and rate is angular (rad/s), fields are in tesla.
//! Files and the CLI speak GHz, MHz, mT and dBm; conversion happens only here.

use std::f64::consts::TAU;

/// `f` in GHz to angular frequency.
pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    f_ghz * 1e9 * TAU
}

pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / TAU / 1e9
}

pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    f_mhz * 1e6 * TAU
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

pub fn hz_to_angular(f_hz: f64) -> f64 {
    f_hz * TAU
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn mt_to_tesla(b_mt: f64) -> f64 {
    b_mt * 1e-3
}

pub fn tesla_to_mt(b: f64) -> f64 {
    b * 1e3
}

/// Power in dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}
