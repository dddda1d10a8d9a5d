use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::kittel_frequency;
use crate::error::{Error, Result};
use crate::params::{MagnonParams, ResonatorParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Drive protocol: a tone at `drive_freq` from `t = 0` until `t_on`, then silence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingdownDrive {
    pub drive_freq: f64,
    /// Input field amplitude (arbitrary units).
    pub amplitude: f64,
    pub t_on: f64,
    pub t_total: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownMeta {
    pub field_b0: f64,
    pub drive_amplitude: f64,
    pub dt: f64,
    /// Reference phase of the homodyne mixer, in radians.
    pub homodyne_phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
}

/// Homodyne voltage samples on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownTrace {
    pub times: Vec<f64>,
    pub voltage: Vec<f64>,
    pub drive_freq: f64,
    pub drive_on_until: f64,
    pub meta: RingdownMeta,
    /// `|alpha|^2 + |beta|^2` per sample; empty for traces read from disk.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energy: Vec<f64>,
}

impl RingdownTrace {
    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t - 1e-9 * self.meta.dt)
    }
}

/// Largest step allowed for a drive at `drive_freq`:
/// `0.05 / max(|omega_r - w_d|, |omega_m - w_d|, g, kappa_r, kappa_m)`.
pub fn max_stable_dt(
    resonator: &ResonatorParams,
    magnon: &MagnonParams,
    g: f64,
    b0: f64,
    drive_freq: f64,
) -> Result<f64> {
    let wr = resonator.omega_r(b0);
    let wm = kittel_frequency(b0, magnon)?;
    let fastest = [
        (wr - drive_freq).abs(),
        (wm - drive_freq).abs(),
        g.abs(),
        resonator.kappa_r(b0),
        magnon.kappa_m,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(if fastest > 0.0 { 0.05 / fastest } else { f64::INFINITY })
}

/// Integrates the coupled amplitudes in the frame rotating at the drive
/// frequency with classical fixed-step RK4:
///
/// `alpha' = (i d_r - kappa_r/2) alpha - i g beta + eps [t < t_on]`,
/// `beta'  = (i d_m - kappa_m/2) beta  - i g alpha`,
///
/// with `d = w_d - omega`, `eps = sqrt(kappa_ext/2) A`. The feedline output is
/// `A [t < t_on] - sqrt(kappa_ext/2) e^{-i phi} alpha`, whose steady state is
/// the hybrid transmission. The mixer reference is aligned with the driven
/// steady-state output, so the detected signal is purely real before
/// switch-off (the emitted field alone sets it if the output vanishes there).
pub fn simulate_ringdown(
    resonator: &ResonatorParams,
    magnon: &MagnonParams,
    g: f64,
    b0: f64,
    drive: &RingdownDrive,
) -> Result<RingdownTrace> {
    let RingdownDrive { drive_freq, amplitude, t_on, t_total, dt } = *drive;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("time step must be positive"));
    }
    if !(t_on >= 0.0 && t_total > t_on) {
        return Err(Error::invalid(format!("need 0 <= t_on < t_total, got t_on = {t_on:e}, t_total = {t_total:e}")));
    }
    if !(g >= 0.0) {
        return Err(Error::domain("coupling must be non-negative"));
    }
    magnon.validate()?;
    let bound = max_stable_dt(resonator, magnon, g, b0, drive_freq)?;
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let kr = resonator.kappa_r(b0);
    let km = magnon.kappa_m;
    if kr < 0.0 {
        return Err(Error::domain(format!("kappa_r({b0} T) is negative")));
    }
    let ar = Complex64::new(-0.5 * kr, drive_freq - resonator.omega_r(b0));
    let am = Complex64::new(-0.5 * km, drive_freq - kittel_frequency(b0, magnon)?);
    let root_ext = (0.5 * resonator.kappa_ext).sqrt();
    let eps = root_ext * amplitude;
    let leak = root_ext * Complex64::from_polar(1.0, -resonator.phi);

    let rhs = |y: [Complex64; 2], on: bool| -> [Complex64; 2] {
        let drive = if on { Complex64::new(eps, 0.0) } else { Complex64::new(0.0, 0.0) };
        [ar * y[0] - I * g * y[1] + drive, am * y[1] - I * g * y[0]]
    };
    let add = |y: [Complex64; 2], k: [Complex64; 2], h: f64| [y[0] + k[0] * h, y[1] + k[1] * h];

    let steps = ((t_total / dt) + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    let mut y = [Complex64::new(0.0, 0.0); 2];
    let mut off_field: Option<Complex64> = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let on = t < t_on;
        if !on && off_field.is_none() {
            let emitted = -leak * y[0];
            let steady = Complex64::new(amplitude, 0.0) + emitted;
            off_field = Some(if steady.norm() > 1e-9 * amplitude.abs() { steady } else { emitted });
        }
        let e = y[0].norm_sqr() + y[1].norm_sqr();
        if !e.is_finite() {
            return Err(Error::Integration(format!("amplitude diverged at t = {t:e} s")));
        }
        if !on {
            if let Some(&prev) = energy.last() {
                if times.last().is_some_and(|&tp: &f64| tp >= t_on) && e > prev * (1.0 + 1e-6) + f64::MIN_POSITIVE {
                    return Err(Error::Integration(format!(
                        "energy grew without drive at t = {t:e} s ({prev:e} -> {e:e})"
                    )));
                }
            }
        }
        times.push(t);
        energy.push(e);
        outputs.push(if on { Complex64::new(amplitude, 0.0) } else { Complex64::new(0.0, 0.0) } - leak * y[0]);
        if k == steps {
            break;
        }
        // Piecewise-constant drive: the source term is sampled at the step start
        // so the switch-off lands exactly on a grid instant when t_on is a multiple of dt.
        let k1 = rhs(y, on);
        let k2 = rhs(add(y, k1, 0.5 * dt), on);
        let k3 = rhs(add(y, k2, 0.5 * dt), on);
        let k4 = rhs(add(y, k3, dt), on);
        y = [
            y[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (dt / 6.0),
            y[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (dt / 6.0),
        ];
    }
    let reference = off_field.unwrap_or_else(|| outputs.last().copied().unwrap_or_default());
    let theta = if reference.norm() > 0.0 { reference.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -theta);
    let voltage = outputs.iter().map(|z| (rot * z).re).collect();
    Ok(RingdownTrace {
        times,
        voltage,
        drive_freq,
        drive_on_until: t_on,
        meta: RingdownMeta {
            field_b0: b0,
            drive_amplitude: amplitude,
            dt,
            homodyne_phase: theta,
            power_dbm: None,
        },
        energy,
    })
}

/// Writes `# key=value` header lines followed by `time_s,voltage` rows.
pub fn write_trace<W: Write>(mut out: W, trace: &RingdownTrace, digest: Option<&str>) -> Result<()> {
    let io = |e: std::io::Error| Error::io("trace output", e);
    writeln!(out, "# drive_freq_rad_s={:.16e}", trace.drive_freq).map_err(io)?;
    writeln!(out, "# t_on_s={:.16e}", trace.drive_on_until).map_err(io)?;
    writeln!(out, "# dt_s={:.16e}", trace.meta.dt).map_err(io)?;
    writeln!(out, "# field_t={:.16e}", trace.meta.field_b0).map_err(io)?;
    writeln!(out, "# drive_amplitude={:.16e}", trace.meta.drive_amplitude).map_err(io)?;
    writeln!(out, "# homodyne_phase_rad={:.16e}", trace.meta.homodyne_phase).map_err(io)?;
    if let Some(p) = trace.meta.power_dbm {
        writeln!(out, "# power_dbm={p:.16e}").map_err(io)?;
    }
    if let Some(d) = digest {
        writeln!(out, "# params_sha256={d}").map_err(io)?;
    }
    writeln!(out, "time_s,voltage").map_err(io)?;
    for (t, v) in trace.times.iter().zip(&trace.voltage) {
        writeln!(out, "{t:.16e},{v:.16e}").map_err(io)?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace<R: BufRead>(input: R) -> Result<RingdownTrace> {
    let mut header = std::collections::BTreeMap::new();
    let mut times = Vec::new();
    let mut voltage = Vec::new();
    let mut seen_columns = false;
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("trace input", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(kv) = line.strip_prefix('#') {
            if let Some((k, v)) = kv.trim().split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !seen_columns {
            if line != "time_s,voltage" {
                return Err(Error::Parse(format!("line {}: expected header `time_s,voltage`", n + 1)));
            }
            seen_columns = true;
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", n + 1)))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)));
        times.push(parse(t)?);
        voltage.push(parse(v)?);
    }
    let num = |k: &str| -> Result<f64> {
        header
            .get(k)
            .ok_or_else(|| Error::Parse(format!("trace header lacks `{k}`")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("header `{k}`: {e}")))
    };
    if times.len() < 2 {
        return Err(Error::Parse("trace has fewer than two samples".into()));
    }
    Ok(RingdownTrace {
        drive_freq: num("drive_freq_rad_s")?,
        drive_on_until: num("t_on_s")?,
        meta: RingdownMeta {
            field_b0: num("field_t")?,
            drive_amplitude: num("drive_amplitude")?,
            dt: num("dt_s")?,
            homodyne_phase: num("homodyne_phase_rad")?,
            power_dbm: num("power_dbm").ok(),
        },
        times,
        voltage,
        energy: Vec::new(),
    })
}
