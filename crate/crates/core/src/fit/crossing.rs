//! Avoided-crossing and branch-dispersion fits.

use serde::{Deserialize, Serialize};

use super::branches::BranchTable;
use super::FitResult;
use crate::dynamics::coupled_branch_frequencies;
use crate::error::{Error, Result};
use crate::lsq::{multi_start_fit, LmOptions, MultiStart};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingFit {
    /// Coupling `g` in rad/s (half the minimum splitting).
    pub g: f64,
    pub g_err: f64,
    /// Field of minimum splitting, in tesla.
    pub b_res: f64,
    pub b_res_err: f64,
    /// Slope of the bare detuning `d(omega_r - omega_m)/dB` in rad/s/T.
    pub detuning_slope: f64,
    pub fit: FitResult,
    pub warnings: Vec<String>,
}

/// Fits `sqrt((s (B - B_res))^2 + 4 g^2)` to measured splittings.
///
/// Near the crossing the bare detuning is linear in field, which is all this
/// model assumes.
pub fn fit_avoided_crossing(splittings: &[(f64, f64)], schedule: &MultiStart) -> Result<CrossingFit> {
    let points: Vec<(f64, f64, f64)> = splittings.iter().map(|&(b, s)| (b, s, 1.0)).collect();
    fit_avoided_crossing_weighted(&points, schedule)
}

/// Same as [`fit_avoided_crossing`] with a standard error per splitting
/// `(B0, omega_plus - omega_minus, sigma)`; residuals are divided by `sigma`.
pub fn fit_avoided_crossing_weighted(points: &[(f64, f64, f64)], schedule: &MultiStart) -> Result<CrossingFit> {
    if points.iter().any(|p| !(p.2 > 0.0) || !p.2.is_finite()) {
        return Err(Error::invalid("splitting standard errors must be finite and positive"));
    }
    let splittings: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let splittings = &splittings[..];
    if splittings.len() < 4 {
        return Err(Error::invalid(format!(
            "avoided-crossing fit needs at least 4 fields with both branches, got {}",
            splittings.len()
        )));
    }
    if splittings.iter().any(|(b, s)| !b.is_finite() || !s.is_finite() || *s <= 0.0) {
        return Err(Error::invalid("splittings must be finite and positive"));
    }
    let (imin, &(b0, s0)) = splittings
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    let mut warnings = Vec::new();
    let bmin = splittings.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let bmax = splittings.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if b0 == bmin || b0 == bmax {
        warnings.push("minimum splitting lies at the edge of the field range; B_res is an extrapolation".to_string());
    }
    // Slope guess from the point farthest from the minimum.
    let (bf, sf) = splittings
        .iter()
        .max_by(|a, b| (a.0 - b0).abs().total_cmp(&(b.0 - b0).abs()))
        .copied()
        .expect("non-empty");
    let slope0 = ((sf * sf - s0 * s0).max(0.0)).sqrt() / (bf - b0).abs().max(f64::MIN_POSITIVE);
    let _ = imin;

    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let (g, b_res, s) = (p[0], p[1], p[2]);
        Some(
            points
                .iter()
                .map(|(b, y, e)| (((s * (b - b_res)).powi(2) + 4.0 * g * g).sqrt() - y) / e)
                .collect(),
        )
    };
    let guess = [0.5 * s0, b0, slope0.max(1.0)];
    let lm = LmOptions {
        scales: Some(vec![0.5 * s0, (bmax - bmin).max(1e-6), slope0.max(1.0)]),
        ..Default::default()
    };
    let (report, _) = multi_start_fit(&residuals, &guess, schedule, &lm)
        .ok_or_else(|| Error::NotConverged("avoided-crossing model could not be evaluated".into()))?;
    let mut fit = FitResult::from_report(&["g", "b_res", "detuning_slope"], &report, schedule.seed);
    fit.values[0] = fit.values[0].abs();
    fit.values[2] = fit.values[2].abs();
    if !fit.converged {
        return Err(Error::NotConverged(fit.diagnostics.join("; ")));
    }
    Ok(CrossingFit {
        g: fit.values[0],
        g_err: fit.std_errors[0],
        b_res: fit.values[1],
        b_res_err: fit.std_errors[1],
        detuning_slope: fit.values[2],
        warnings,
        fit,
    })
}

/// Starting values for [`fit_branch_dispersion`], all angular or tesla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionGuess {
    pub mu0_meff: f64,
    pub g: f64,
    pub omega_r0: f64,
    pub gamma_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    pub mu0_meff: f64,
    pub g: f64,
    pub omega_r0: f64,
    pub gamma_r: f64,
    pub fit: FitResult,
}

impl DispersionFit {
    pub fn omega_r(&self, b: f64) -> f64 {
        self.omega_r0 + self.gamma_r * b
    }

    /// Field in `[lo, hi]` where the fitted resonator and Kittel lines cross,
    /// with its standard error propagated from the fit covariance.
    pub fn crossing_field(&self, gamma: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let meff = self.mu0_meff;
        let root = |b: f64| (b * (b + meff)).max(0.0).sqrt();
        let f = |b: f64| self.omega_r(b) - gamma * root(b);
        let (mut a, mut c) = (lo, hi);
        let (fa, fc) = (f(a), f(c));
        if !(fa.is_finite() && fc.is_finite()) || fa.signum() == fc.signum() {
            return Err(Error::invalid(format!("fitted lines do not cross between {lo} T and {hi} T")));
        }
        for _ in 0..200 {
            let m = 0.5 * (a + c);
            if f(m).signum() == fa.signum() {
                a = m;
            } else {
                c = m;
            }
        }
        let b = 0.5 * (a + c);
        // Implicit-function derivatives of f(B; meff, omega_r0, gamma_r) = 0.
        let df_db = self.gamma_r - gamma * (2.0 * b + meff) / (2.0 * root(b));
        let grad = [-gamma * b / (2.0 * root(b)), 0.0, 1.0, b];
        let cov = &self.fit.covariance;
        let mut var = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                var += grad[i] * cov[i][j] * grad[j];
            }
        }
        Ok((b, var.max(0.0).sqrt() / df_db.abs()))
    }
}

/// Heuristic start: the narrowest splitting marks the crossing, its midpoint
/// the common frequency, and Kittel's formula then fixes `mu0 Meff`.
pub fn dispersion_guess(table: &BranchTable, gamma: f64) -> Option<DispersionGuess> {
    let (b, s) = table
        .splittings()
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let row = table.rows.iter().find(|r| r.field == b)?;
    let w = 0.5 * (row.upper.as_ref()?.omega + row.lower.as_ref()?.omega);
    let meff = w * w / (gamma * gamma * b) - b;
    Some(DispersionGuess { mu0_meff: meff, g: 0.5 * s, omega_r0: w, gamma_r: 0.0 })
}

/// Fits both measured branches to the two-mode dispersion with a Kittel magnon
/// line `gamma sqrt(B (B + mu0 Meff))` and a linear resonator line.
pub fn fit_branch_dispersion(
    table: &BranchTable,
    gamma: f64,
    guess: Option<DispersionGuess>,
    schedule: &MultiStart,
) -> Result<DispersionFit> {
    // Residuals are weighted by the per-point standard errors. A floor keeps
    // an over-confident single fit from dominating.
    let floor = {
        let mut e: Vec<f64> = table
            .rows
            .iter()
            .flat_map(|r| [r.upper.as_ref(), r.lower.as_ref()])
            .flatten()
            .map(|p| p.omega_err)
            .filter(|e| e.is_finite() && *e > 0.0)
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e.get(e.len() / 10).copied().unwrap_or(1.0)
    };
    let sigma = |p: &super::branches::BranchPoint| if p.omega_err.is_finite() { p.omega_err.max(floor) } else { f64::INFINITY };
    let mut obs: Vec<(f64, f64, bool, f64)> = Vec::new();
    for r in &table.rows {
        if let Some(p) = &r.upper {
            obs.push((r.field, p.omega, true, sigma(p)));
        }
        if let Some(p) = &r.lower {
            obs.push((r.field, p.omega, false, sigma(p)));
        }
    }
    obs.retain(|o| o.3.is_finite());
    if obs.len() < 5 {
        return Err(Error::invalid(format!("dispersion fit needs at least 5 branch points, got {}", obs.len())));
    }
    if !(gamma > 0.0) {
        return Err(Error::domain("gyromagnetic ratio must be positive"));
    }
    let guess = guess
        .or_else(|| dispersion_guess(table, gamma))
        .ok_or_else(|| Error::invalid("no field resolves both branches; supply an initial guess"))?;

    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let (meff, g, w0, gr) = (p[0], p[1], p[2], p[3]);
        let mut out = Vec::with_capacity(obs.len());
        for &(b, w, upper, e) in &obs {
            let x = b * (b + meff);
            if x < 0.0 {
                return None;
            }
            let wm = gamma * x.sqrt();
            let (wp, wl) = coupled_branch_frequencies(w0 + gr * b, wm, g);
            out.push((if upper { wp } else { wl } - w) / e);
        }
        Some(out)
    };
    let p0 = [guess.mu0_meff, guess.g, guess.omega_r0, guess.gamma_r];
    let gamma_scale = if guess.gamma_r != 0.0 { guess.gamma_r.abs() } else { 1e-3 * guess.omega_r0 };
    let lm = LmOptions {
        scales: Some(vec![guess.mu0_meff.abs(), guess.g.abs(), guess.omega_r0.abs(), gamma_scale]),
        ..Default::default()
    };
    let (report, _) = multi_start_fit(&residuals, &p0, schedule, &lm)
        .ok_or_else(|| Error::NotConverged("dispersion model could not be evaluated".into()))?;
    let mut fit = FitResult::from_report(&["mu0_meff", "g", "omega_r0", "gamma_r"], &report, schedule.seed);
    fit.values[1] = fit.values[1].abs();
    if !fit.converged {
        return Err(Error::NotConverged(fit.diagnostics.join("; ")));
    }
    Ok(DispersionFit {
        mu0_meff: fit.values[0],
        g: fit.values[1],
        omega_r0: fit.values[2],
        gamma_r: fit.values[3],
        fit,
    })
}
