//! End-to-end extraction of coupling, damping rates and cooperativity from a
//! field-frequency transmission map.

use serde::{Deserialize, Serialize};

use crate::config::DeviceConfig;
use crate::dynamics::branch_linewidths;
use crate::error::{Error, Result};
use crate::fit::{
    cooperativity, extract_branches, fit_branch_linewidths, fit_avoided_crossing_weighted, fit_branch_dispersion, interpolate_kappa_r,
    kappa_m_from_branches, resonator_kappa_from_branch, Branch, BranchTable, BranchWindow, CrossingFit,
    DispersionFit, DispersionGuess, FieldWindows, LinewidthFit, ResonanceFitOptions,
};
use crate::lsq::MultiStart;
use crate::sweep_map::SweepMap;
use crate::transmission::{stitch_background, BackgroundSegment};
use crate::units::mhz_to_angular;

/// Rough device model used to place the branch windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    pub gamma: f64,
    pub mu0_meff: f64,
    pub g: f64,
    pub omega_r0: f64,
    pub gamma_r: f64,
    pub kappa_r: f64,
    pub kappa_m: f64,
}

impl NominalModel {
    pub fn from_device(d: &DeviceConfig, b: f64) -> Self {
        Self {
            gamma: d.magnon.gamma,
            mu0_meff: d.magnon.mu0_meff,
            g: d.coupling.g_uniform,
            omega_r0: d.resonator.omega_r0,
            gamma_r: d.resonator.gamma_r,
            kappa_r: d.resonator.kappa_r(b),
            kappa_m: d.magnon.kappa_m,
        }
    }

    pub fn omega_r(&self, b: f64) -> f64 {
        self.omega_r0 + self.gamma_r * b
    }

    pub fn omega_m(&self, b: f64) -> f64 {
        self.gamma * (b * (b + self.mu0_meff)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub seed: u64,
    pub detection_sigma: f64,
    /// Window half-width in predicted linewidths.
    pub window_linewidths: f64,
    pub min_half_width: f64,
    pub max_half_width: f64,
    /// Fields used for the resonator damping anchors; defaults to the sweep's end fields.
    pub anchor_fields: Option<(f64, f64)>,
    /// Number of window refinements after the first dispersion fit.
    pub refinements: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            detection_sigma: 3.0,
            window_linewidths: 6.0,
            min_half_width: mhz_to_angular(3.0),
            max_half_width: mhz_to_angular(60.0),
            anchor_fields: None,
            refinements: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaAnchor {
    pub field: f64,
    pub branch: Branch,
    /// Linewidth of the resonator-like branch as fitted.
    pub kappa_branch: f64,
    pub kappa_branch_err: f64,
    /// Bare resonator damping after removing the magnon admixture.
    pub kappa_r: f64,
}

/// Magnon damping from `kappa_+ + kappa_- - kappa_r` at fields near the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRuleEstimate {
    pub kappa_m: f64,
    pub kappa_m_err: f64,
    pub samples: usize,
    /// Resonator damping at B_res interpolated between the corrected anchors.
    pub kappa_r_at_res: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Coupling and crossing field from the dispersion fit.
    pub g: f64,
    pub g_err: f64,
    pub b_res: f64,
    pub b_res_err: f64,
    pub mu0_meff: f64,
    pub mu0_meff_err: f64,
    /// Damping rates from the global linewidth fit.
    pub kappa_r_at_res: f64,
    pub kappa_r_err: f64,
    pub kappa_m: f64,
    pub kappa_m_err: f64,
    pub cooperativity: f64,
    pub cooperativity_err: f64,
    pub fields_with_both_branches: usize,
    pub skipped_branches: usize,
    /// Splitting hyperbola over fields resolving both branches.
    pub crossing: CrossingFit,
    pub dispersion: DispersionFit,
    pub linewidths: LinewidthFit,
    pub anchors: Vec<KappaAnchor>,
    pub sum_rule: Option<SumRuleEstimate>,
    pub branches: BranchTable,
    pub diagnostics: Vec<String>,
}

fn windows(sweep: &SweepMap, m: &NominalModel, opts: &PipelineOptions) -> Vec<FieldWindows> {
    let omegas = sweep.omegas();
    let wmin = omegas.iter().copied().fold(f64::INFINITY, f64::min);
    let wmax = omegas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    sweep
        .fields()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (wr, wm) = (m.omega_r(b), m.omega_m(b));
            let (wp, wl) = crate::dynamics::coupled_branch_frequencies(wr, wm, m.g);
            let (kp, kl) = branch_linewidths(wr, m.kappa_r, wm, m.kappa_m, m.g).unwrap_or((m.kappa_m, m.kappa_m));
            let hw = |k: f64| (opts.window_linewidths * k).clamp(opts.min_half_width, opts.max_half_width);
            let mid = 0.5 * (wp + wl);
            let inside = |w: f64| w >= wmin && w <= wmax;
            let upper = inside(wp).then(|| BranchWindow {
                lo: mid.max(wp - hw(kp)).max(wmin),
                hi: (wp + hw(kp)).min(wmax),
                expected: wp,
            });
            let lower = inside(wl).then(|| BranchWindow {
                lo: (wl - hw(kl)).max(wmin),
                hi: mid.min(wl + hw(kl)).min(wmax),
                expected: wl,
            });
            FieldWindows { field_index: i, upper, lower }
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn nearest_row(table: &BranchTable, b: f64) -> Option<usize> {
    table
        .rows
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1.field - b).abs().total_cmp(&(y.1.field - b).abs()))
        .map(|(i, _)| i)
}

/// Runs the full inverse problem on a raw (un-normalized) sweep.
///
/// `nominal` only positions the fit windows; every reported quantity comes
/// from the data.
pub fn analyze_sweep(
    sweep: &SweepMap,
    segments: &[BackgroundSegment],
    nominal: &NominalModel,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    let background = stitch_background(sweep, segments)?;
    let norm = sweep.normalized(&background)?;
    let schedule = MultiStart { seed: opts.seed, ..MultiStart::default() };
    let res_opts = ResonanceFitOptions {
        schedule: schedule.clone(),
        detection_sigma: opts.detection_sigma,
        ..Default::default()
    };
    let mut diagnostics = Vec::new();

    let mut model = *nominal;
    let mut table = extract_branches(&norm, &windows(&norm, &model, opts), &res_opts)?;
    let mut dispersion = None;
    for pass in 0..=opts.refinements {
        let guess = DispersionGuess {
            mu0_meff: model.mu0_meff,
            g: model.g,
            omega_r0: model.omega_r0,
            gamma_r: model.gamma_r,
        };
        let d = fit_branch_dispersion(&table, model.gamma, Some(guess), &schedule)?;
        model.mu0_meff = d.mu0_meff;
        model.g = d.g;
        model.omega_r0 = d.omega_r0;
        model.gamma_r = d.gamma_r;
        dispersion = Some(d);
        if pass < opts.refinements {
            table = extract_branches(&norm, &windows(&norm, &model, opts), &res_opts)?;
        }
    }
    let dispersion = dispersion.expect("at least one dispersion pass");

    let splittings: Vec<(f64, f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| {
            let (u, l) = (r.upper.as_ref()?, r.lower.as_ref()?);
            Some((r.field, u.omega - l.omega, u.omega_err.hypot(l.omega_err)))
        })
        .filter(|p| p.2.is_finite() && p.2 > 0.0)
        .collect();
    // The global dispersion fit uses every resolved branch point, so it sets
    // g and B_res; the splitting hyperbola is kept as a cross-check.
    let crossing = fit_avoided_crossing_weighted(&splittings, &schedule)?;
    diagnostics.extend(crossing.warnings.iter().cloned());
    let fields = norm.fields();
    let (b_first, b_last) = (fields[0], fields[fields.len() - 1]);
    let (b_res, b_res_err) = dispersion.crossing_field(model.gamma, b_first.min(b_last), b_first.max(b_last))?;
    let g = dispersion.g;
    let g_err = dispersion.fit.std_errors[1];
    if (crossing.g - g).abs() > 3.0 * crossing.g_err.hypot(g_err) {
        diagnostics.push(format!(
            "splitting hyperbola gives g = {:.6e} rad/s, {:.1} sigma from the dispersion fit",
            crossing.g,
            (crossing.g - g).abs() / crossing.g_err.hypot(g_err)
        ));
    }

    // Damping anchors: the resonator-like branch at the two ends of the field range.
    let (b_lo, b_hi) = opts.anchor_fields.unwrap_or((b_first, b_last));
    let anchor_rows: Vec<(usize, Branch)> = [b_lo, b_hi]
        .iter()
        .map(|&b| {
            let i = nearest_row(&table, b).ok_or_else(|| Error::invalid("no branch rows extracted"))?;
            let branch = if model.omega_r(table.rows[i].field) > model.omega_m(table.rows[i].field) {
                Branch::Upper
            } else {
                Branch::Lower
            };
            if table.rows[i].get(branch).is_none() {
                return Err(Error::invalid(format!(
                    "resonator-like branch missing at anchor field {} T",
                    table.rows[i].field
                )));
            }
            Ok((i, branch))
        })
        .collect::<Result<_>>()?;

    // Fields where both branches carry comparable weight, and neither sits
    // near a sweep edge that would truncate its line, feed the sum rule.
    let omegas = norm.omegas();
    let (wmin, wmax) = (omegas[0].min(omegas[omegas.len() - 1]), omegas[0].max(omegas[omegas.len() - 1]));
    let both: Vec<usize> = (0..table.rows.len())
        .filter(|&i| {
            let r = &table.rows[i];
            let (wr, wm) = (model.omega_r(r.field), model.omega_m(r.field));
            let (wp, wl) = crate::dynamics::coupled_branch_frequencies(wr, wm, g);
            let (kp, kl) = branch_linewidths(wr, model.kappa_r, wm, model.kappa_m, g).unwrap_or((0.0, 0.0));
            r.upper.is_some()
                && r.lower.is_some()
                && (wr - wm).abs() <= g
                && wp + 3.0 * kp <= wmax
                && wl - 3.0 * kl >= wmin
        })
        .collect();

    // Sum-rule estimate with admixture-corrected end anchors for kappa_r,
    // iterated because the correction needs kappa_m.
    let mut kappa_m = model.kappa_m;
    let mut anchors = Vec::new();
    let mut samples = Vec::new();
    for _ in 0..50 {
        anchors.clear();
        for &(i, branch) in &anchor_rows {
            let row = &table.rows[i];
            let p = row.get(branch).expect("checked above");
            let kr = resonator_kappa_from_branch(p.kappa, branch, model.omega_r(row.field), model.omega_m(row.field), kappa_m, g)
                .unwrap_or_else(|e| {
                    diagnostics.push(format!("admixture correction at {} T failed: {e}", row.field));
                    p.kappa
                });
            anchors.push(KappaAnchor {
                field: row.field,
                branch,
                kappa_branch: p.kappa,
                kappa_branch_err: p.kappa_err,
                kappa_r: kr,
            });
        }
        let pts: Vec<(f64, f64)> = anchors.iter().map(|a| (a.field, a.kappa_r)).collect();
        samples.clear();
        for &i in &both {
            let r = &table.rows[i];
            let kr = interpolate_kappa_r(&pts, r.field)?;
            let (up, lo) = (r.upper.as_ref().expect("both"), r.lower.as_ref().expect("both"));
            if let Ok(k) = kappa_m_from_branches(up.kappa, lo.kappa, kr) {
                samples.push(k);
            }
        }
        if samples.is_empty() {
            break;
        }
        // Median: single-field linewidths occasionally latch onto noise.
        let next = median(&samples);
        let done = (next - kappa_m).abs() <= 1e-12 * next;
        kappa_m = next;
        if done {
            break;
        }
    }
    let pts: Vec<(f64, f64)> = anchors.iter().map(|a| (a.field, a.kappa_r)).collect();
    let anchor_kappa_r = interpolate_kappa_r(&pts, b_res)?;
    let sum_rule = if samples.is_empty() {
        diagnostics.push("no field near the crossing resolves both branches cleanly; sum rule skipped".to_string());
        None
    } else {
        let n = samples.len() as f64;
        let dev: Vec<f64> = samples.iter().map(|k| (k - kappa_m).abs()).collect();
        // Robust scatter, inflated by the median's asymptotic efficiency.
        let err = 1.4826 * median(&dev) * (std::f64::consts::PI / 2.0).sqrt() / n.sqrt();
        Some(SumRuleEstimate { kappa_m, kappa_m_err: err, samples: samples.len(), kappa_r_at_res: anchor_kappa_r })
    };

    let guess = (sum_rule.as_ref().map_or(model.kappa_m, |s| s.kappa_m), anchor_kappa_r.max(0.01 * model.kappa_r));
    let linewidths = fit_branch_linewidths(&table, &dispersion, model.gamma, b_res, guess, &schedule)?;
    if linewidths.rejected > 0 {
        diagnostics.push(format!("{} branch linewidths rejected as outliers", linewidths.rejected));
    }
    let (kappa_m, kappa_r_at_res) = (linewidths.kappa_m, linewidths.kappa_r_ref);
    let c = cooperativity(g, kappa_r_at_res, kappa_m)?;
    let cov = &linewidths.fit.covariance;
    let rel2 = (2.0 * g_err / g).powi(2)
        + cov[0][0] / (kappa_m * kappa_m)
        + cov[1][1] / (kappa_r_at_res * kappa_r_at_res)
        + 2.0 * cov[0][1] / (kappa_m * kappa_r_at_res);

    Ok(PipelineReport {
        g,
        g_err,
        b_res,
        b_res_err,
        mu0_meff: dispersion.mu0_meff,
        mu0_meff_err: dispersion.fit.std_errors[0],
        kappa_r_at_res,
        kappa_r_err: linewidths.kappa_r_ref_err,
        kappa_m,
        kappa_m_err: linewidths.kappa_m_err,
        cooperativity: c,
        cooperativity_err: c * rel2.max(0.0).sqrt(),
        fields_with_both_branches: splittings.len(),
        skipped_branches: table.skipped.len(),
        crossing,
        dispersion,
        linewidths,
        anchors,
        sum_rule,
        branches: table,
        diagnostics,
    })
}
