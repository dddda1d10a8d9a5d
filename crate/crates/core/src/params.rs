//! Device description: resonator, magnet and coupling parameters.
//!
//! All rates and frequencies are angular (rad/s) and fields are in tesla.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Bare lumped-element resonator with a phenomenological linear field dependence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Resonance frequency extrapolated to zero field.
    pub omega_r0: f64,
    /// d(omega_r)/dB.
    pub gamma_r: f64,
    /// Total (loaded) damping at `b_ref`.
    pub kappa_r0: f64,
    /// d(kappa_r)/dB.
    pub kappa_r_slope: f64,
    /// Anchor field of the damping model.
    pub b_ref: f64,
    /// Coupling rate to the feedline.
    pub kappa_ext: f64,
    /// Impedance-mismatch phase.
    pub phi: f64,
    /// Background amplitude scale.
    pub attenuation_a: f64,
    /// Characteristic impedance, ohm.
    pub z_r: f64,
    /// Inductor wire width, m.
    pub wire_width: f64,
}

impl ResonatorParams {
    pub fn omega_r(&self, b0: f64) -> f64 {
        self.omega_r0 + self.gamma_r * b0
    }

    pub fn kappa_r(&self, b0: f64) -> f64 {
        self.kappa_r0 + self.kappa_r_slope * (b0 - self.b_ref)
    }

    /// Checks the damping invariants at both ends of `[b_lo, b_hi]`.
    ///
    /// The damping model is linear, so the endpoints bound it over the range.
    pub fn validate_over(&self, b_lo: f64, b_hi: f64) -> Result<()> {
        if !(self.kappa_ext >= 0.0) {
            return Err(Error::domain("kappa_ext must be non-negative"));
        }
        for b in [b_lo, b_hi] {
            let k = self.kappa_r(b);
            if !(k > 0.0) {
                return Err(Error::domain(format!("kappa_r({b} T) = {k} is not positive")));
            }
            if self.kappa_ext > k * (1.0 + 1e-12) {
                return Err(Error::domain(format!(
                    "kappa_ext = {} exceeds total damping {k} at {b} T",
                    self.kappa_ext
                )));
            }
        }
        Ok(())
    }
}

/// Magnetic film description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnonParams {
    /// Gyromagnetic ratio, rad/s per T.
    pub gamma: f64,
    /// mu0 * M_eff, T.
    pub mu0_meff: f64,
    /// Squared exchange length, m^2.
    pub lambda_ex_sq: f64,
    /// Film thickness, m.
    pub thickness: f64,
    /// Uniform-mode damping.
    pub kappa_m: f64,
    /// mu0 * M_s, T.
    pub ms_field: f64,
    /// Magnetic volume, m^3.
    pub volume: f64,
    pub n_spins: f64,
}

impl MagnonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::domain("gamma must be positive"));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::domain("thickness must be positive"));
        }
        if !(self.lambda_ex_sq >= 0.0) {
            return Err(Error::domain("lambda_ex_sq must be non-negative"));
        }
        if !(self.kappa_m >= 0.0) {
            return Err(Error::domain("kappa_m must be non-negative"));
        }
        if !(self.n_spins >= 0.0) {
            return Err(Error::domain("n_spins must be non-negative"));
        }
        Ok(())
    }

    /// Spin count implied by `ms_field` and `volume`, one Bohr magneton per spin.
    pub fn derived_spin_count(&self, constants: &PhysicalConstants) -> f64 {
        let ms = self.ms_field / constants.mu0();
        ms * self.volume / constants.mu_b()
    }

    /// Copy with `n_spins` replaced by [`Self::derived_spin_count`].
    pub fn with_derived_spin_count(mut self, constants: &PhysicalConstants) -> Self {
        self.n_spins = self.derived_spin_count(constants);
        self
    }
}

/// Rule giving the resonator coupling of the n-th thickness mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CouplingRule {
    /// `g_n = g / (n + 1)`.
    InverseIndex,
    /// Explicit `g_1 .. g_nmax`.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    pub g_uniform: f64,
    pub n_max: usize,
    pub rule: CouplingRule,
}

impl CouplingModel {
    pub fn new(g_uniform: f64, n_max: usize, rule: CouplingRule) -> Result<Self> {
        let model = Self { g_uniform, n_max, rule };
        model.validate()?;
        Ok(model)
    }

    /// Uniform mode only.
    pub fn uniform(g: f64) -> Self {
        Self {
            g_uniform: g,
            n_max: 0,
            rule: CouplingRule::InverseIndex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_uniform >= 0.0) {
            return Err(Error::domain("coupling g must be non-negative"));
        }
        if let CouplingRule::Explicit(list) = &self.rule {
            if list.len() != self.n_max {
                return Err(Error::invalid(format!(
                    "explicit coupling list has {} entries but n_max = {}",
                    list.len(),
                    self.n_max
                )));
            }
            if let Some(bad) = list.iter().find(|g| !(**g >= 0.0)) {
                return Err(Error::domain(format!("negative mode coupling {bad}")));
            }
        }
        Ok(())
    }

    /// Coupling of thickness mode `n` (1-based). `n = 0` is the uniform mode.
    pub fn g_n(&self, n: usize) -> f64 {
        if n == 0 {
            return self.g_uniform;
        }
        match &self.rule {
            CouplingRule::InverseIndex => self.g_uniform / (n as f64 + 1.0),
            CouplingRule::Explicit(list) => list.get(n - 1).copied().unwrap_or(0.0),
        }
    }
}

/// `20 log10(|s21| / |s21_0|)`.
pub fn db_from_ratio(s21: Complex64, s21_0: Complex64) -> Result<f64> {
    let reference = s21_0.norm();
    if !(reference > 0.0) {
        return Err(Error::domain("reference transmission has zero magnitude"));
    }
    Ok(20.0 * (s21.norm() / reference).log10())
}
