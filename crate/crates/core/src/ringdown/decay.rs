use std::f64::consts::TAU;

use super::RingdownTrace;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::lsq::{levenberg_marquardt, multi_start_fit, LmOptions, MultiStart};

fn post_drive(trace: &RingdownTrace, t_start: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_start < trace.drive_on_until - 1e-9 * trace.dt() {
        return Err(Error::invalid(format!(
            "fit must start after the drive switches off ({:e} s), got {t_start:e} s",
            trace.drive_on_until
        )));
    }
    let i0 = trace.index_at(t_start);
    let t: Vec<f64> = trace.times[i0..].iter().map(|t| t - t_start).collect();
    let y = trace.voltage[i0..].to_vec();
    if t.len() < 10 {
        return Err(Error::invalid(format!("need at least 10 samples after t_start, got {}", t.len())));
    }
    Ok((t, y))
}

fn no_decay(tau: f64, span: f64) -> bool {
    !(tau.is_finite() && tau > 0.0 && tau < 1e3 * span)
}

/// Fits `A exp(-(t - t_start)/tau)` to the post-drive samples.
///
/// A log-linear regression seeds the nonlinear fit when the samples share a
/// sign; otherwise the seed comes from the first sample and the 1/e crossing.
pub fn fit_exponential_decay(trace: &RingdownTrace, t_start: f64) -> Result<FitResult> {
    let (t, y) = post_drive(trace, t_start)?;
    let span = t[t.len() - 1];
    let sign = if y.iter().all(|v| *v > 0.0) {
        1.0
    } else if y.iter().all(|v| *v < 0.0) {
        -1.0
    } else {
        0.0
    };
    let guess = if sign != 0.0 {
        let n = t.len() as f64;
        let ly: Vec<f64> = y.iter().map(|v| (sign * v).ln()).collect();
        let mt = t.iter().sum::<f64>() / n;
        let ml = ly.iter().sum::<f64>() / n;
        let stt: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
        let stl: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - ml)).sum();
        let slope = stl / stt;
        if slope >= 0.0 || no_decay(-1.0 / slope, span) {
            return Err(Error::NotConverged(format!("no decay detected (log slope {slope:e} 1/s)")));
        }
        [sign * (ml - slope * mt).exp(), -1.0 / slope]
    } else {
        let a0 = y[0];
        let target = a0 / std::f64::consts::E;
        let k = y.iter().position(|v| if a0 > 0.0 { *v <= target } else { *v >= target });
        [a0, k.map(|k| t[k].max(t[1])).unwrap_or(span)]
    };
    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        (p[1] > 0.0).then(|| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect())
    };
    let lm = LmOptions { scales: Some(vec![guess[0].abs(), guess[1]]), ..Default::default() };
    let report = levenberg_marquardt(&residuals, &guess, &lm)
        .ok_or_else(|| Error::NotConverged("exponential model left its domain".into()))?;
    if no_decay(report.params[1], span) {
        return Err(Error::NotConverged(format!("no decay detected (tau = {:e} s)", report.params[1])));
    }
    Ok(FitResult::from_report(&["amplitude", "tau_voltage"], &report, 0))
}

/// Beat frequency (Hz) from the spacing of sign changes while the signal is
/// still above 1e-3 of its peak; `None` with fewer than two crossings.
fn zero_crossing_frequency(t: &[f64], y: &[f64]) -> Option<f64> {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = y.iter().rposition(|v| v.abs() >= 1e-3 * peak)?;
    let mut crossings = Vec::new();
    for i in 1..=last {
        if (y[i - 1] < 0.0) != (y[i] < 0.0) && y[i - 1] != y[i] {
            // Linear interpolation of the crossing instant.
            let f = y[i - 1] / (y[i - 1] - y[i]);
            crossings.push(t[i - 1] + f * (t[i] - t[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let n = crossings.len();
    Some((n - 1) as f64 / (2.0 * (crossings[n - 1] - crossings[0])))
}

/// Dominant non-zero frequency (Hz) of `y`, by a direct periodogram scan.
fn dominant_frequency(t: &[f64], y: &[f64]) -> (f64, f64) {
    let stride = (t.len() / 4096).max(1);
    let ts: Vec<f64> = t.iter().step_by(stride).copied().collect();
    let ys: Vec<f64> = y.iter().step_by(stride).copied().collect();
    let span = ts[ts.len() - 1] - ts[0];
    let nyquist = 0.5 / (span / (ts.len() - 1) as f64);
    let df = 1.0 / (4.0 * span);
    let kmax = ((nyquist / df) as usize).min(8000);
    let power = |f: f64| {
        let (mut c, mut s) = (0.0, 0.0);
        for (t, y) in ts.iter().zip(&ys) {
            let (sn, cs) = (TAU * f * t).sin_cos();
            c += y * cs;
            s += y * sn;
        }
        c * c + s * s
    };
    let mut best = (0.0, power(0.0));
    for k in 1..=kmax {
        let f = k as f64 * df;
        let p = power(f);
        if p > best.1 {
            best = (f, p);
        }
    }
    (best.0, 1.0 / span)
}

/// Fits `A exp(-t/tau) cos(2 pi f t + phase) + offset` to the post-drive samples,
/// with `t` measured from `t_start`.
///
/// A beat below the spectral resolution of the window degenerates to the
/// exponential fit, reported with `beat_freq = 0` and a warning.
pub fn fit_decaying_sinusoid(trace: &RingdownTrace, t_start: f64) -> Result<FitResult> {
    const NAMES: [&str; 5] = ["amplitude", "tau_voltage", "beat_freq", "phase", "offset"];
    let (t, y) = post_drive(trace, t_start)?;
    let span = t[t.len() - 1];
    let (f_psd, resolution) = dominant_frequency(&t, &y);
    // A strongly damped beat smears the periodogram peak toward zero; the
    // crossing spacing does not depend on the envelope.
    let f0 = zero_crossing_frequency(&t, &y).unwrap_or(f_psd);
    if f0 < resolution {
        let exp = fit_exponential_decay(trace, t_start)?;
        let n = NAMES.len();
        let mut values = vec![0.0; n];
        let mut std_errors = vec![0.0; n];
        let mut covariance = vec![vec![0.0; n]; n];
        for i in 0..2 {
            values[i] = exp.values[i];
            std_errors[i] = exp.std_errors[i];
            for j in 0..2 {
                covariance[i][j] = exp.covariance[i][j];
            }
        }
        let mut diagnostics = exp.diagnostics.clone();
        diagnostics.push(format!(
            "beat frequency below the spectral resolution {resolution:.3e} Hz; degenerate fit reported as pure decay"
        ));
        return Ok(FitResult {
            names: NAMES.iter().map(|s| s.to_string()).collect(),
            values,
            std_errors,
            covariance,
            diagnostics,
            ..exp
        });
    }

    // Envelope and phase seeds from the first samples.
    let a0 = y.iter().take(((1.0 / f0) / (t[1] - t[0])).ceil() as usize + 1).fold(0.0f64, |m, v| m.max(v.abs()));
    let tau0 = {
        let target = a0 / std::f64::consts::E;
        let last_big = y.iter().rposition(|v| v.abs() >= target).unwrap_or(0);
        t[last_big].max(1.0 / f0)
    };
    let phase0 = if a0 > 0.0 { (y[0] / a0).clamp(-1.0, 1.0).acos() } else { 0.0 };
    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        (p[1] > 0.0 && p[2] > 0.0).then(|| {
            t.iter()
                .zip(&y)
                .map(|(t, y)| p[0] * (-t / p[1]).exp() * (TAU * p[2] * t + p[3]).cos() + p[4] - y)
                .collect()
        })
    };
    let mut best: Option<crate::lsq::LmReport> = None;
    // The sign of the initial slope is ambiguous from acos; try both phases.
    for ph in [phase0, -phase0] {
        let guess = [a0, tau0, f0, ph, 0.0];
        let lm = LmOptions { scales: Some(vec![a0, tau0, f0, 1.0, a0]), ..Default::default() };
        let schedule = MultiStart { starts: 3, spread: 0.05, seed: 0x5eed };
        if let Some((r, _)) = multi_start_fit(&residuals, &guess, &schedule, &lm) {
            if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                best = Some(r);
            }
        }
    }
    let mut report = best.ok_or_else(|| Error::NotConverged("sinusoid model left its domain".into()))?;
    if report.params[0] < 0.0 {
        report.params[0] = -report.params[0];
        report.params[3] += std::f64::consts::PI;
    }
    report.params[3] = (report.params[3] + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    if no_decay(report.params[1], span) {
        return Err(Error::NotConverged(format!("no decay detected (tau = {:e} s)", report.params[1])));
    }
    let mut fit = FitResult::from_report(&NAMES, &report, 0);
    if report.params[2] * span < 3.0 {
        fit.diagnostics.push(format!(
            "fit window holds {:.2} beat periods; at least 3 are needed for a reliable beat frequency",
            report.params[2] * span
        ));
    }
    Ok(fit)
}

/// `tau_energy = tau_voltage / 2` and `kappa = 1 / tau_energy`.
pub fn decay_rate_conversion(tau_voltage: f64) -> Result<(f64, f64)> {
    if !(tau_voltage > 0.0 && tau_voltage.is_finite()) {
        return Err(Error::domain(format!("voltage time constant must be positive, got {tau_voltage:e}")));
    }
    let tau_e = tau_voltage / 2.0;
    Ok((tau_e, 1.0 / tau_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ringdown::RingdownMeta;

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> RingdownTrace {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        RingdownTrace {
            voltage: times.iter().map(|&t| f(t)).collect(),
            times,
            drive_freq: 0.0,
            drive_on_until: 0.0,
            meta: RingdownMeta { field_b0: 0.1, drive_amplitude: 1.0, dt, homodyne_phase: 0.0, power_dbm: None },
            energy: Vec::new(),
        }
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let tau = 170e-9;
        for a in [0.7, -0.3] {
            let tr = synthetic(|t| a * (-t / tau).exp(), 1e-9, 1000);
            let fit = fit_exponential_decay(&tr, 0.0).unwrap();
            assert!((fit.values[1] / tau - 1.0).abs() < 1e-8, "{}", fit.values[1]);
            assert!((fit.values[0] / a - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exponential_fit_measures_time_from_t_start() {
        let tau = 50e-9;
        let tr = synthetic(|t| (-t / tau).exp(), 1e-9, 600);
        let fit = fit_exponential_decay(&tr, 100e-9).unwrap();
        assert!((fit.values[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn constant_trace_has_no_decay() {
        let tr = synthetic(|_| 0.4, 1e-9, 200);
        let err = fit_exponential_decay(&tr, 0.0).unwrap_err();
        assert!(err.to_string().contains("no decay"), "{err}");
    }

    #[test]
    fn too_few_samples_or_early_start_are_rejected() {
        let mut tr = synthetic(|t| (-t / 1e-8).exp(), 1e-9, 100);
        assert!(fit_exponential_decay(&tr, 95e-9).is_err());
        tr.drive_on_until = 20e-9;
        assert!(fit_exponential_decay(&tr, 10e-9).is_err());
    }

    #[test]
    fn exact_decaying_sinusoid_is_recovered() {
        let (a, tau, f, ph, off) = (0.8, 170e-9, 5e6, 0.6, 0.01);
        let tr = synthetic(|t| a * (-t / tau).exp() * (TAU * f * t + ph).cos() + off, 1e-9, 1500);
        let fit = fit_decaying_sinusoid(&tr, 0.0).unwrap();
        for (got, want) in fit.values.iter().zip([a, tau, f, ph, off]) {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        }
        assert!(fit.diagnostics.is_empty(), "{:?}", fit.diagnostics);
    }

    #[test]
    fn strongly_damped_beat_is_still_found() {
        // Less than one beat period per decay constant.
        let (tau, f) = (30e-9, 5e6);
        let tr = synthetic(|t| (-t / tau).exp() * (TAU * f * t + 0.3).cos(), 0.25e-9, 3200);
        let fit = fit_decaying_sinusoid(&tr, 0.0).unwrap();
        assert!((fit.values[2] / f - 1.0).abs() < 1e-6, "{}", fit.values[2]);
    }

    #[test]
    fn unmodulated_decay_degenerates_to_the_exponential() {
        let tau = 170e-9;
        let tr = synthetic(|t| 0.5 * (-t / tau).exp(), 1e-9, 800);
        let fit = fit_decaying_sinusoid(&tr, 0.0).unwrap();
        let exp = fit_exponential_decay(&tr, 0.0).unwrap();
        assert_eq!(fit.values[2], 0.0);
        assert_eq!(fit.values[1], exp.values[1]);
        assert!(fit.diagnostics.iter().any(|d| d.contains("resolution")));
    }

    #[test]
    fn short_window_is_flagged() {
        let tr = synthetic(|t| (-t / 1e-6).exp() * (TAU * 5e6 * t).cos(), 1e-9, 450);
        let fit = fit_decaying_sinusoid(&tr, 0.0).unwrap();
        assert!(fit.diagnostics.iter().any(|d| d.contains("beat periods")), "{:?}", fit.diagnostics);
    }

    #[test]
    fn voltage_time_constant_converts_to_rate() {
        let (tau_e, kappa) = decay_rate_conversion(170.0e-9).unwrap();
        assert!((tau_e - 85.0e-9).abs() < 1e-20);
        let mhz = kappa / TAU / 1e6;
        assert_eq!(format!("{mhz:.3}"), "1.872");
        assert_eq!(decay_rate_conversion(2.0).unwrap(), (1.0, 1.0));
        let (te, k) = decay_rate_conversion(3.3e-7).unwrap();
        assert_eq!(2.0 * te, 3.3e-7);
        assert_eq!(1.0 / k, te);
        assert!(decay_rate_conversion(0.0).is_err());
    }
}
