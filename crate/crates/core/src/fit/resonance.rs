//! Single notch-type resonance fits in quality-factor form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FitResult;
use crate::error::{Error, Result};
use crate::lsq::{multi_start_fit, LmOptions, MultiStart};
use crate::transmission::{s21_bare, BareResonanceModel};

pub const RESONANCE_PARAMS: [&str; 5] = ["a", "q_loaded", "q_coupling_abs", "phi", "omega_res"];

/// One frequency trace through a resonance.
#[derive(Debug, Clone, PartialEq)]
pub enum ResonanceTrace {
    Complex { omegas: Vec<f64>, s21: Vec<Complex64> },
    Magnitude { omegas: Vec<f64>, magnitude: Vec<f64> },
}

impl ResonanceTrace {
    pub fn omegas(&self) -> &[f64] {
        match self {
            Self::Complex { omegas, .. } | Self::Magnitude { omegas, .. } => omegas,
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        match self {
            Self::Complex { s21, .. } => s21.iter().map(|z| z.norm()).collect(),
            Self::Magnitude { magnitude, .. } => magnitude.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.omegas().len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas().is_empty()
    }

    /// Sub-trace with `lo <= omega <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let keep = |w: &f64| *w >= lo && *w <= hi;
        match self {
            Self::Complex { omegas, s21 } => {
                let (o, s): (Vec<f64>, Vec<Complex64>) =
                    omegas.iter().zip(s21).filter(|(w, _)| keep(w)).map(|(w, z)| (*w, *z)).unzip();
                Self::Complex { omegas: o, s21: s }
            }
            Self::Magnitude { omegas, magnitude } => {
                let (o, m): (Vec<f64>, Vec<f64>) =
                    omegas.iter().zip(magnitude).filter(|(w, _)| keep(w)).map(|(w, m)| (*w, *m)).unzip();
                Self::Magnitude { omegas: o, magnitude: m }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `|S21|` residuals; the usable mode for magnitude-only data.
    #[default]
    Magnitude,
    /// Real and imaginary residuals; requires complex data.
    Complex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceFitOptions {
    pub mode: ResidualMode,
    pub schedule: MultiStart,
    /// Minimum dip depth in units of the depth's noise estimate.
    pub detection_sigma: f64,
    /// Preferred resonance position when several dips are equally deep.
    pub expected_omega: Option<f64>,
}

impl Default for ResonanceFitOptions {
    fn default() -> Self {
        Self {
            mode: ResidualMode::Magnitude,
            schedule: MultiStart::default(),
            detection_sigma: 3.0,
            expected_omega: None,
        }
    }
}

/// Robust per-point noise from second differences (insensitive to smooth lineshapes).
pub fn point_noise(y: &[f64]) -> f64 {
    if y.len() < 5 {
        return 0.0;
    }
    let mut d: Vec<f64> = y.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let med = median(&mut d.clone());
    for v in d.iter_mut() {
        *v = (*v - med).abs();
    }
    1.4826 * median(&mut d) / 6f64.sqrt()
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Heuristic starting point and detection figures for a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipEstimate {
    pub model: BareResonanceModel,
    pub depth: f64,
    /// Depth that pure noise would reach at this dip's width: the noise of a
    /// FWHM-wide average, scaled by the expected extreme over the trace.
    pub depth_noise: f64,
    pub points_in_fwhm: usize,
}

pub fn estimate_dip(omegas: &[f64], mag: &[f64], expected: Option<f64>) -> Result<DipEstimate> {
    let n = mag.len();
    if n < 7 {
        return Err(Error::invalid(format!("resonance trace needs at least 7 points, got {n}")));
    }
    let edge = (n / 10).max(2);
    let mut edges: Vec<f64> = mag[..edge].iter().chain(&mag[n - edge..]).copied().collect();
    let a0 = median(&mut edges);
    let sigma = point_noise(mag);

    // Box-car matched filter over a ladder of widths. For a Lorentzian dip
    // the SNR of a box average peaks at a box 1.39 FWHM wide, where the box
    // mean is 0.681 of the peak depth. Unlike a half-depth crossing this
    // stays reliable when the dip is only a few noise levels deep.
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in mag.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let box_depth = |k: usize, i: usize| a0 - (prefix[i + k] - prefix[i]) / k as f64;
    let sigma_floor = sigma.max(1e-12 * a0);
    let mut widths = vec![1usize];
    while widths.last().copied().unwrap_or(1) < n / 2 {
        let last = *widths.last().expect("non-empty");
        widths.push(((last as f64 * 1.15).ceil() as usize).max(last + 1));
    }
    let (mut best_k, mut best_i, mut best_snr) = (1, 0, f64::NEG_INFINITY);
    for &k in widths.iter().filter(|&&k| k <= n) {
        let scale = (k as f64).sqrt() / sigma_floor;
        for i in 0..=n - k {
            let snr = box_depth(k, i) * scale;
            if snr > best_snr {
                (best_k, best_i, best_snr) = (k, i, snr);
            }
        }
    }
    if let Some(target) = expected {
        // Among local maxima at the chosen width that are as significant as
        // the best within noise, take the closest to `target`.
        let k = best_k;
        let scale = (k as f64).sqrt() / sigma_floor;
        let snr: Vec<f64> = (0..=n - k).map(|i| box_depth(k, i) * scale).collect();
        let centre = |i: usize| omegas[i + k / 2];
        let mut best = (best_i, (centre(best_i) - target).abs());
        for i in 0..snr.len() {
            let left = i == 0 || snr[i] >= snr[i - 1];
            let right = i + 1 == snr.len() || snr[i] >= snr[i + 1];
            if left && right && best_snr - snr[i] <= 3.0 {
                let d = (centre(i) - target).abs();
                if d < best.1 {
                    best = (i, d);
                }
            }
        }
        best_i = best.0;
    }
    let imin = (best_i + best_k / 2).min(n - 1);
    let depth = (box_depth(best_k, best_i) / 0.681).min(0.999 * a0);
    let d = (depth / a0).clamp(1e-9, 0.999);
    let step = (omegas[n - 1] - omegas[0]).abs() / (n - 1) as f64;
    let points_in_fwhm = ((best_k as f64 / 1.39).round() as usize).max(1);
    let width = points_in_fwhm as f64 * step;
    // |S|/a = 1 - d/2 at normalized detuning u of a Lorentzian dip with depth d.
    let lvl = 1.0 - d / 2.0;
    let u = ((lvl * lvl - (1.0 - d) * (1.0 - d)) / (1.0 - lvl * lvl)).max(1e-12).sqrt();
    let omega0 = omegas[imin];
    let q_loaded = u * omega0 / width;
    let model = BareResonanceModel {
        omega_res: omega0,
        q_loaded,
        q_coupling_abs: q_loaded / d,
        phi: 0.0,
        attenuation_a: a0,
    };
    Ok(DipEstimate {
        model,
        depth,
        depth_noise: sigma / (points_in_fwhm as f64).sqrt() * trials_factor(n, points_in_fwhm),
        points_in_fwhm,
    })
}

/// Expected maximum, in standard deviations, of `n / width` independent normal samples.
fn trials_factor(n: usize, width: usize) -> f64 {
    let trials = (n as f64 / width as f64).max(std::f64::consts::E);
    (2.0 * trials.ln()).sqrt()
}

fn model_of(p: &[f64]) -> Option<BareResonanceModel> {
    let m = BareResonanceModel {
        attenuation_a: p[0],
        q_loaded: p[1],
        q_coupling_abs: p[2],
        phi: p[3],
        omega_res: p[4],
    };
    (m.attenuation_a > 0.0 && m.q_loaded > 0.0 && m.q_coupling_abs > 0.0 && m.omega_res > 0.0).then_some(m)
}

fn to_params(m: &BareResonanceModel) -> Vec<f64> {
    vec![m.attenuation_a, m.q_loaded, m.q_coupling_abs, m.phi, m.omega_res]
}

/// The other `(|Q_c|, phi)` giving an identical `|S21|` for the same `Q_l`.
fn magnitude_twin(m: &BareResonanceModel) -> BareResonanceModel {
    let r = m.coupling_ratio();
    let c1 = r * r - 2.0 * r * m.phi.cos();
    let c2 = r * m.phi.sin();
    let big_r = r * r;
    let twin_r2 = (c1 * c1 + 4.0 * c2 * c2) / big_r;
    let r2 = twin_r2.sqrt();
    let cos_phi = (twin_r2 - c1) / (2.0 * r2);
    let sin_phi = c2 / r2;
    BareResonanceModel {
        q_coupling_abs: m.q_loaded / r2,
        phi: sin_phi.atan2(cos_phi),
        ..*m
    }
}

fn is_physical(m: &BareResonanceModel) -> bool {
    m.coupling_ratio() * m.phi.cos() <= 1.0 + 1e-9
}

/// Fits `a`, `Q_l`, `|Q_c|`, `phi` and `omega_res` to a single resonance.
///
/// Fails with [`Error::NoResonance`] when the dip is not distinguishable from
/// noise. A fit that exhausts the restart schedule returns `converged = false`.
pub fn fit_resonance(trace: &ResonanceTrace, opts: &ResonanceFitOptions) -> Result<FitResult> {
    let omegas = trace.omegas();
    if omegas.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("non-finite frequency in trace"));
    }
    let mag = trace.magnitudes();
    if mag.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample in trace"));
    }
    let est = estimate_dip(omegas, &mag, opts.expected_omega)?;
    if est.depth <= 1e-12 * est.model.attenuation_a {
        return Err(Error::NoResonance { depth: est.depth, threshold: opts.detection_sigma * est.depth_noise });
    }

    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let m = model_of(p)?;
        match (opts.mode, trace) {
            (ResidualMode::Complex, ResonanceTrace::Complex { omegas, s21 }) => {
                let mut r = Vec::with_capacity(2 * omegas.len());
                for (w, z) in omegas.iter().zip(s21) {
                    let d = s21_bare(*w, &m) - z;
                    r.push(d.re);
                    r.push(d.im);
                }
                Some(r)
            }
            _ => Some(omegas.iter().zip(&mag).map(|(w, y)| s21_bare(*w, &m).norm() - y).collect()),
        }
    };
    if opts.mode == ResidualMode::Complex && !matches!(trace, ResonanceTrace::Complex { .. }) {
        return Err(Error::invalid("complex residuals need complex data"));
    }

    let guess = to_params(&est.model);
    let width = est.model.kappa_loaded();
    let lm = LmOptions {
        scales: Some(vec![guess[0], guess[1], guess[2], 1.0, width]),
        ..LmOptions::default()
    };
    // The restart schedule only runs when the heuristic start fails.
    let first = crate::lsq::levenberg_marquardt(&residuals, &guess, &lm).filter(|r| r.converged);
    let mut report = match first {
        Some(r) => r,
        None => match multi_start_fit(&residuals, &guess, &opts.schedule, &lm) {
            Some((r, _)) => r,
            None => return Err(Error::NotConverged("resonance model left its domain from every start".into())),
        },
    };

    let mut diagnostics = Vec::new();
    if opts.mode == ResidualMode::Magnitude {
        let m = model_of(&report.params).expect("accepted fit lies in the domain");
        if !is_physical(&m) {
            let twin = magnitude_twin(&m);
            if let Some(refit) = crate::lsq::levenberg_marquardt(&residuals, &to_params(&twin), &lm) {
                report = refit;
            }
            diagnostics.push("refolded onto the non-negative internal loss solution".to_string());
        }
    }
    report.params[3] = wrap_phase(report.params[3]);

    let mut fit = FitResult::from_report(&RESONANCE_PARAMS, &report, opts.schedule.seed);
    let m = model_of(&fit.values).expect("fit lies in the domain");
    let (w_lo, w_hi) = (omegas[0].min(omegas[omegas.len() - 1]), omegas[0].max(omegas[omegas.len() - 1]));
    // Significance is judged on the fitted line: the smoothed-data width is
    // unreliable once the dip is only a few noise levels deep.
    let depth = omegas
        .iter()
        .map(|w| (m.attenuation_a - s21_bare(*w, &m).norm()).abs())
        .fold(0.0, f64::max);
    let step = (w_hi - w_lo) / (omegas.len() - 1) as f64;
    let n_fwhm = ((m.kappa_loaded() / step).round() as usize).clamp(1, omegas.len());
    let threshold = opts.detection_sigma * point_noise(&mag) / (n_fwhm as f64).sqrt() * trials_factor(omegas.len(), n_fwhm);
    if depth <= threshold {
        return Err(Error::NoResonance { depth, threshold });
    }
    if !(w_lo..=w_hi).contains(&m.omega_res) {
        return Err(Error::NotConverged(format!(
            "fitted resonance at {:.6e} rad/s lies outside the window",
            m.omega_res
        )));
    }
    let span = w_hi - w_lo;
    if span < 3.0 * m.kappa_loaded() {
        diagnostics.push(format!(
            "window spans {:.2} linewidths; fewer than 3 leaves Q poorly constrained",
            span / m.kappa_loaded()
        ));
    }
    fit.diagnostics.extend(diagnostics);
    Ok(fit)
}

fn wrap_phase(phi: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut p = phi % two_pi;
    if p > std::f64::consts::PI {
        p -= two_pi;
    } else if p <= -std::f64::consts::PI {
        p += two_pi;
    }
    p
}

/// Bare-resonance model carried by a fit from [`fit_resonance`].
pub fn resonance_model(fit: &FitResult) -> Result<BareResonanceModel> {
    let get = |k: &str| fit.get(k).ok_or_else(|| Error::invalid(format!("fit lacks parameter `{k}`")));
    Ok(BareResonanceModel {
        attenuation_a: get("a")?,
        q_loaded: get("q_loaded")?,
        q_coupling_abs: get("q_coupling_abs")?,
        phi: get("phi")?,
        omega_res: get("omega_res")?,
    })
}
