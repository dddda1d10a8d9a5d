//! Global fit of every resolved branch linewidth to the coupled-mode
//! damping model, with the dispersion held fixed.

use serde::{Deserialize, Serialize};

use super::branches::{Branch, BranchTable};
use super::crossing::DispersionFit;
use super::FitResult;
use crate::dynamics::branch_linewidths;
use crate::error::{Error, Result};
use crate::lsq::{multi_start_fit, LmOptions, MultiStart};

pub const LINEWIDTH_PARAMS: [&str; 3] = ["kappa_m", "kappa_r_ref", "kappa_r_slope"];

/// Magnon damping and a linear resonator damping `kappa_r_ref + slope (B - b_ref)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinewidthFit {
    pub kappa_m: f64,
    pub kappa_m_err: f64,
    pub b_ref: f64,
    pub kappa_r_ref: f64,
    pub kappa_r_ref_err: f64,
    pub kappa_r_slope: f64,
    /// Branch points rejected as outliers before the final fit.
    pub rejected: usize,
    pub fit: FitResult,
}

impl LinewidthFit {
    pub fn kappa_r(&self, b: f64) -> f64 {
        self.kappa_r_ref + self.kappa_r_slope * (b - self.b_ref)
    }
}

struct Obs {
    b: f64,
    branch: Branch,
    kappa: f64,
    sigma: f64,
}

/// Fits `kappa_m` and a linear `kappa_r(B)` to the linewidths in `table`.
///
/// Branch positions come from `dispersion` (with gyromagnetic ratio
/// `gamma`); `guess` is `(kappa_m, kappa_r)` to start from. Points whose
/// normalized residual exceeds five robust standard deviations are dropped
/// once and the fit repeated.
pub fn fit_branch_linewidths(
    table: &BranchTable,
    dispersion: &DispersionFit,
    gamma: f64,
    b_ref: f64,
    guess: (f64, f64),
    schedule: &MultiStart,
) -> Result<LinewidthFit> {
    let mut errs: Vec<f64> = table
        .rows
        .iter()
        .flat_map(|r| [r.upper.as_ref(), r.lower.as_ref()])
        .flatten()
        .map(|p| p.kappa_err)
        .filter(|e| e.is_finite() && *e > 0.0)
        .collect();
    errs.sort_by(|a, b| a.total_cmp(b));
    let floor = errs.get(errs.len() / 10).copied().unwrap_or(1.0);
    let mut obs: Vec<Obs> = Vec::new();
    for r in &table.rows {
        for branch in [Branch::Upper, Branch::Lower] {
            if let Some(p) = r.get(branch) {
                if p.kappa_err.is_finite() && p.kappa.is_finite() {
                    obs.push(Obs { b: r.field, branch, kappa: p.kappa, sigma: p.kappa_err.max(floor) });
                }
            }
        }
    }
    if obs.len() < 4 {
        return Err(Error::invalid(format!("linewidth fit needs at least 4 branch points, got {}", obs.len())));
    }
    let meff = dispersion.mu0_meff;
    let residuals = |obs: &[Obs], p: &[f64]| -> Option<Vec<f64>> {
        let (km, kr0, slope) = (p[0], p[1], p[2]);
        obs.iter()
            .map(|o| {
                let wm = gamma * (o.b * (o.b + meff)).max(0.0).sqrt();
                let kr = kr0 + slope * (o.b - b_ref);
                let (kp, kl) = branch_linewidths(dispersion.omega_r(o.b), kr, wm, km, dispersion.g).ok()?;
                let model = if o.branch == Branch::Upper { kp } else { kl };
                Some((model - o.kappa) / o.sigma)
            })
            .collect()
    };
    let span = obs.iter().map(|o| o.b).fold(f64::NEG_INFINITY, f64::max) - obs.iter().map(|o| o.b).fold(f64::INFINITY, f64::min);
    let p0 = [guess.0, guess.1, 0.0];
    let lm = LmOptions {
        scales: Some(vec![guess.0.abs(), guess.1.abs(), guess.1.abs() / span.max(1e-9)]),
        ..Default::default()
    };
    let run = |obs: &[Obs], p0: &[f64]| {
        multi_start_fit(&|p: &[f64]| residuals(obs, p), p0, schedule, &lm)
            .map(|r| r.0)
            .ok_or_else(|| Error::NotConverged("linewidth model left its domain from every start".into()))
    };
    let first = run(&obs, &p0)?;
    let mut scaled: Vec<f64> = first.residuals.iter().map(|r| r.abs()).collect();
    scaled.sort_by(|a, b| a.total_cmp(b));
    let robust = 1.4826 * scaled[scaled.len() / 2];
    let before = obs.len();
    let keep: Vec<bool> = first.residuals.iter().map(|r| r.abs() <= 5.0 * robust).collect();
    let mut it = keep.iter();
    obs.retain(|_| *it.next().expect("one flag per point"));
    let rejected = before - obs.len();
    let report = if rejected > 0 { run(&obs, &first.params)? } else { first };

    let fit = FitResult::from_report(&LINEWIDTH_PARAMS, &report, schedule.seed);
    if !fit.converged {
        return Err(Error::NotConverged(fit.diagnostics.join("; ")));
    }
    if fit.values[0] < 0.0 || fit.values[1] < 0.0 {
        return Err(Error::domain(format!(
            "fitted damping rates are unphysical: kappa_m = {:.4e}, kappa_r = {:.4e} rad/s",
            fit.values[0], fit.values[1]
        )));
    }
    Ok(LinewidthFit {
        kappa_m: fit.values[0],
        kappa_m_err: fit.std_errors[0],
        b_ref,
        kappa_r_ref: fit.values[1],
        kappa_r_ref_err: fit.std_errors[1],
        kappa_r_slope: fit.values[2],
        rejected,
        fit,
    })
}
