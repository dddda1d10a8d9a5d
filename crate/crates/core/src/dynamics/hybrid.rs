//! Two-mode (resonator + uniform magnon) hybridization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequencies and linewidths of the two hybrid branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPair {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
}

impl BranchPair {
    pub fn compute(omega_r: f64, kappa_r: f64, omega_m: f64, kappa_m: f64, g: f64) -> Result<Self> {
        let (omega_plus, omega_minus) = coupled_branch_frequencies(omega_r, omega_m, g);
        let (kappa_plus, kappa_minus) = branch_linewidths(omega_r, kappa_r, omega_m, kappa_m, g)?;
        Ok(Self {
            omega_plus,
            omega_minus,
            kappa_plus,
            kappa_minus,
        })
    }

    pub fn splitting(&self) -> f64 {
        self.omega_plus - self.omega_minus
    }
}

/// Lossless hybrid frequencies `(omega_plus, omega_minus)`.
pub fn coupled_branch_frequencies(omega_r: f64, omega_m: f64, g: f64) -> (f64, f64) {
    let delta = omega_m - omega_r;
    let half_split = 0.5 * delta.hypot(2.0 * g);
    let center = omega_r + 0.5 * delta;
    (center + half_split, center - half_split)
}

/// Principal square root of the complex detuning term shared by the damped branch formulas.
fn damped_root(omega_r: f64, kappa_r: f64, omega_m: f64, kappa_m: f64, g: f64) -> Complex64 {
    let detuning = Complex64::new(omega_m - omega_r, 0.5 * (kappa_r - kappa_m));
    (detuning * detuning + 4.0 * g * g).sqrt()
}

/// Damped branch linewidths `(kappa_plus, kappa_minus)` (full widths).
///
/// The principal branch of the square root pairs `kappa_plus` with the upper
/// frequency branch. `kappa_plus + kappa_minus = kappa_r + kappa_m` identically.
pub fn branch_linewidths(
    omega_r: f64,
    kappa_r: f64,
    omega_m: f64,
    kappa_m: f64,
    g: f64,
) -> Result<(f64, f64)> {
    if !(kappa_r >= 0.0 && kappa_m >= 0.0 && g >= 0.0) {
        return Err(Error::domain("damping rates and coupling must be non-negative"));
    }
    let im = damped_root(omega_r, kappa_r, omega_m, kappa_m, g).im;
    let mean = 0.5 * (kappa_r + kappa_m);
    let (kp, km) = (mean - im, mean + im);
    // Rounding can leave -1e-16-scale values when one rate is zero.
    let tol = 1e-12 * (kappa_r + kappa_m);
    if kp < -tol || km < -tol {
        return Err(Error::BranchSelection {
            kappa_plus: kp,
            kappa_minus: km,
        });
    }
    Ok((kp.max(0.0), km.max(0.0)))
}

/// Complex eigenfrequencies `omega - i kappa / 2` of the damped two-mode problem,
/// upper branch first. Their real parts are the natural ring-down frequencies.
pub fn complex_branch_frequencies(
    omega_r: f64,
    kappa_r: f64,
    omega_m: f64,
    kappa_m: f64,
    g: f64,
) -> (Complex64, Complex64) {
    let wr = Complex64::new(omega_r, -0.5 * kappa_r);
    let wm = Complex64::new(omega_m, -0.5 * kappa_m);
    let root = damped_root(omega_r, kappa_r, omega_m, kappa_m, g);
    let center = 0.5 * (wr + wm);
    (center + 0.5 * root, center - 0.5 * root)
}
