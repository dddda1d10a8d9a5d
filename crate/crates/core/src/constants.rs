//! Physical constants (CODATA 2018 exact/recommended values).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    hbar: f64,
    /// Vacuum permeability, T·m/A.
    mu0: f64,
    /// Bohr magneton, J/T.
    mu_b: f64,
    /// Electron Landé g-factor.
    g_e: f64,
}

impl PhysicalConstants {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const MU0: f64 = 1.256_637_062_12e-6;
    pub const MU_B: f64 = 9.274_010_078_3e-24;

    pub fn new(hbar: f64, mu0: f64, mu_b: f64, g_e: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("mu0", mu0), ("mu_b", mu_b), ("g_e", g_e)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { hbar, mu0, mu_b, g_e })
    }

    /// Same constants with a different g-factor, e.g. the free-electron 2.0023.
    pub fn with_g_factor(self, g_e: f64) -> Result<Self> {
        Self::new(self.hbar, self.mu0, self.mu_b, g_e)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu_b(&self) -> f64 {
        self.mu_b
    }

    pub fn g_e(&self) -> f64 {
        self.g_e
    }
}

impl Default for PhysicalConstants {
    /// SI values with `g_e = 2`.
    fn default() -> Self {
        Self {
            hbar: Self::HBAR,
            mu0: Self::MU0,
            mu_b: Self::MU_B,
            g_e: 2.0,
        }
    }
}
