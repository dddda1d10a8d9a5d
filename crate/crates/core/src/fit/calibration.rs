//! Coil calibration from electron spin resonance of a reference sample.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Linear field-versus-current calibration. Fields in tesla, currents in ampere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCalibration {
    pub slope_t_per_a: f64,
    pub intercept_t: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// Residual degrees of freedom; errors are zero when this is zero.
    pub dof: usize,
}

impl FieldCalibration {
    pub fn field(&self, current: f64) -> f64 {
        self.intercept_t + self.slope_t_per_a * current
    }
}

/// Resonance field `hbar omega / (g mu_B)` of a free spin with g-factor `g_factor`.
pub fn resonance_field(omega: f64, g_factor: f64, consts: &PhysicalConstants) -> f64 {
    consts.hbar() * omega / (g_factor * consts.mu_b())
}

/// Ordinary least squares of resonance field on coil current.
pub fn fit_field_calibration(
    points: &[(f64, f64)],
    g_factor: f64,
    consts: &PhysicalConstants,
) -> Result<FieldCalibration> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("calibration needs at least 2 points, got {}", points.len())));
    }
    if !(g_factor > 0.0) {
        return Err(Error::domain("g-factor must be positive"));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(i, w)| (i, resonance_field(w, g_factor, consts)))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(Error::invalid("calibration currents are degenerate"));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = xy.len() - 2;
    let (slope_err, intercept_err) = if dof == 0 {
        (0.0, 0.0)
    } else {
        let ssr: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let s2 = ssr / dof as f64;
        ((s2 / sxx).sqrt(), (s2 * (1.0 / n + mx * mx / sxx)).sqrt())
    };
    Ok(FieldCalibration { slope_t_per_a: slope, intercept_t: intercept, slope_err, intercept_err, dof })
}
