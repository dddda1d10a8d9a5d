//! Per-field extraction of the two hybrid branches from a sweep map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::resonance::{fit_resonance, resonance_model, ResonanceFitOptions, ResonanceTrace};
use super::FitResult;
use crate::dynamics::coupled_branch_frequencies;
use crate::error::{Error, Result};
use crate::sweep_map::SweepMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Lower,
}

/// Frequency window searched for one branch, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchWindow {
    pub lo: f64,
    pub hi: f64,
    /// Predicted position, used to break ties between equally deep dips.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldWindows {
    pub field_index: usize,
    pub upper: Option<BranchWindow>,
    pub lower: Option<BranchWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub omega: f64,
    pub omega_err: f64,
    /// Loaded linewidth `omega / Q_l`.
    pub kappa: f64,
    pub kappa_err: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub field: f64,
    pub upper: Option<BranchPoint>,
    pub lower: Option<BranchPoint>,
}

impl BranchRow {
    pub fn get(&self, b: Branch) -> Option<&BranchPoint> {
        match b {
            Branch::Upper => self.upper.as_ref(),
            Branch::Lower => self.lower.as_ref(),
        }
    }

    pub fn splitting(&self) -> Option<f64> {
        Some(self.upper.as_ref()?.omega - self.lower.as_ref()?.omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedBranch {
    pub field: f64,
    pub branch: Branch,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchTable {
    pub rows: Vec<BranchRow>,
    pub skipped: Vec<SkippedBranch>,
}

impl BranchTable {
    /// `(field, upper - lower)` for rows where both branches were resolved.
    pub fn splittings(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| Some((r.field, r.splitting()?))).collect()
    }
}

/// Windows around the branches predicted by a rough dispersion estimate.
///
/// Each branch window is capped at the midpoint between the predicted
/// branches so the other branch's dip never enters it. Windows whose
/// predicted centre lies outside the sweep are omitted.
pub fn predicted_windows(
    sweep: &SweepMap,
    omega_r: impl Fn(f64) -> f64,
    omega_m: impl Fn(f64) -> f64,
    g: f64,
    half_width: f64,
) -> Vec<FieldWindows> {
    let omegas = sweep.omegas();
    let wmin = omegas.iter().copied().fold(f64::INFINITY, f64::min);
    let wmax = omegas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    sweep
        .fields()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (wp, wm) = coupled_branch_frequencies(omega_r(b), omega_m(b), g);
            let mid = 0.5 * (wp + wm);
            let inside = |w: f64| w >= wmin && w <= wmax;
            let upper = inside(wp).then(|| BranchWindow {
                lo: mid.max(wp - half_width).max(wmin),
                hi: (wp + half_width).min(wmax),
                expected: wp,
            });
            let lower = inside(wm).then(|| BranchWindow {
                lo: (wm - half_width).max(wmin),
                hi: mid.min(wm + half_width).min(wmax),
                expected: wm,
            });
            FieldWindows { field_index: i, upper, lower }
        })
        .collect()
}

fn row_trace(sweep: &SweepMap, i: usize) -> ResonanceTrace {
    let omegas = sweep.omegas();
    if sweep.is_complex() {
        ResonanceTrace::Complex { omegas, s21: sweep.row(i) }
    } else {
        let magnitude = (0..sweep.n_freqs()).map(|j| sweep.magnitude(i, j)).collect();
        ResonanceTrace::Magnitude { omegas, magnitude }
    }
}

fn fit_window(trace: &ResonanceTrace, w: &BranchWindow, opts: &ResonanceFitOptions) -> Result<BranchPoint> {
    let sub = trace.window(w.lo.min(w.hi), w.hi.max(w.lo));
    let o = ResonanceFitOptions { expected_omega: Some(w.expected), ..opts.clone() };
    let fit = fit_resonance(&sub, &o)?;
    if !fit.converged {
        return Err(Error::NotConverged(fit.diagnostics.join("; ")));
    }
    let m = resonance_model(&fit)?;
    let i_q = fit.index("q_loaded").expect("q_loaded present");
    let i_w = fit.index("omega_res").expect("omega_res present");
    let kappa = m.kappa_loaded();
    // First-order propagation of kappa = omega / Q_l.
    let (vw, vq, cwq) = (fit.covariance[i_w][i_w], fit.covariance[i_q][i_q], fit.covariance[i_w][i_q]);
    let (dw, dq) = (1.0 / m.q_loaded, -m.omega_res / (m.q_loaded * m.q_loaded));
    let kappa_var = dw * dw * vw + dq * dq * vq + 2.0 * dw * dq * cwq;
    Ok(BranchPoint {
        omega: m.omega_res,
        omega_err: fit.std_errors[i_w],
        kappa,
        kappa_err: kappa_var.max(0.0).sqrt(),
        fit,
    })
}

/// Fits one resonance per branch window and collects positions and linewidths.
///
/// Branches whose dip is not distinguishable from noise, or whose fit fails,
/// are skipped and listed with the reason. Rows are processed in parallel;
/// the result does not depend on thread scheduling.
pub fn extract_branches(sweep: &SweepMap, windows: &[FieldWindows], opts: &ResonanceFitOptions) -> Result<BranchTable> {
    if let Some(w) = windows.iter().find(|w| w.field_index >= sweep.n_fields()) {
        return Err(Error::invalid(format!("window references field index {} of {}", w.field_index, sweep.n_fields())));
    }
    let per_row: Vec<(BranchRow, Vec<SkippedBranch>)> = windows
        .par_iter()
        .map(|fw| {
            let field = sweep.fields()[fw.field_index];
            let trace = row_trace(sweep, fw.field_index);
            let mut skipped = Vec::new();
            let mut run = |w: &Option<BranchWindow>, branch: Branch| -> Option<BranchPoint> {
                let w = w.as_ref()?;
                match fit_window(&trace, w, opts) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        skipped.push(SkippedBranch { field, branch, reason: e.to_string() });
                        None
                    }
                }
            };
            let upper = run(&fw.upper, Branch::Upper);
            let lower = run(&fw.lower, Branch::Lower);
            (BranchRow { field, upper, lower }, skipped)
        })
        .collect();
    let mut table = BranchTable::default();
    for (row, skipped) in per_row {
        table.skipped.extend(skipped);
        if row.upper.is_some() || row.lower.is_some() {
            table.rows.push(row);
        }
    }
    Ok(table)
}
