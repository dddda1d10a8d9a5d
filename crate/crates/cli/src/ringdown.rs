use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use cavimag::dynamics::{branch_linewidths, complex_branch_frequencies, kittel_frequency};
use cavimag::ringdown::{decay_rate_conversion, max_stable_dt, write_trace};
use cavimag::units::{angular_to_ghz, angular_to_mhz, ghz_to_angular, mhz_to_angular};
use cavimag::{fit_decaying_sinusoid, fit_exponential_decay, sha256_hex, simulate_ringdown, FitResult, RingdownDrive};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::context::{sibling, write_json, CliResult, CommandConfig, DeviceArgs, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    /// The branch with the larger resonator weight.
    Auto,
    Upper,
    Lower,
}

#[derive(Debug, Args)]
pub struct RingdownArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    /// Static field.
    #[arg(long, value_name = "MT")]
    pub field_mt: f64,
    /// Hybrid branch to drive.
    #[arg(long, value_enum, default_value_t = BranchArg::Auto)]
    pub branch: BranchArg,
    /// Drive offset from the branch frequency.
    #[arg(long, value_name = "MHZ", default_value_t = 0.0, allow_negative_numbers = true)]
    pub detuning_mhz: f64,
    /// Explicit drive frequency; replaces --branch and --detuning-mhz.
    #[arg(long, value_name = "GHZ")]
    pub drive_ghz: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Integration step; defaults to 90% of the stability bound.
    #[arg(long, value_name = "NS")]
    pub dt_ns: Option<f64>,
    /// Pulse length; defaults to ten voltage decay times of the driven branch.
    #[arg(long, value_name = "NS")]
    pub t_on_ns: Option<f64>,
    /// Trace length; defaults to the pulse, the settling time and six decay times.
    #[arg(long, value_name = "NS")]
    pub t_total_ns: Option<f64>,
    /// Start of the fit window; defaults to ten lifetimes of the other branch after switch-off.
    #[arg(long, value_name = "NS")]
    pub fit_start_ns: Option<f64>,
    /// Trace CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Decay report; defaults to `<out>.report.json`.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RingdownReport {
    field_t: f64,
    drive_ghz: f64,
    drive_rad_s: f64,
    dt_ns: f64,
    dt_bound_ns: f64,
    t_on_ns: f64,
    t_total_ns: f64,
    fit_start_ns: f64,
    tau_voltage_ns: f64,
    tau_voltage_ns_err: f64,
    tau_energy_ns: f64,
    kappa_mhz: f64,
    kappa_rad_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beat_mhz: Option<f64>,
    model_kappa_plus_mhz: f64,
    model_kappa_minus_mhz: f64,
    fit: FitResult,
}

pub fn run(a: RingdownArgs) -> CliResult<()> {
    let mut cfg = CommandConfig::new("ringdown");
    let device = a.device.load(&mut cfg)?;
    let (res, mag, g) = (&device.resonator, &device.magnon, device.coupling.g_uniform);
    let b = a.field_mt * 1e-3;
    let wr = res.omega_r(b);
    let wm = kittel_frequency(b, mag)?;
    let (kr, km) = (res.kappa_r(b), mag.kappa_m);
    let (up, lo) = complex_branch_frequencies(wr, kr, wm, km, g);
    let (kp, kl) = branch_linewidths(wr, kr, wm, km, g)?;
    let upper = match a.branch {
        BranchArg::Auto => wr > wm,
        BranchArg::Upper => true,
        BranchArg::Lower => false,
    };
    let (w_branch, kappa, kappa_other) = if upper { (up.re, kp, kl) } else { (lo.re, kl, kp) };
    let drive_freq = match a.drive_ghz {
        Some(f) => ghz_to_angular(f),
        None => w_branch + mhz_to_angular(a.detuning_mhz),
    };
    let detuned = (drive_freq - w_branch).abs() > 1e-6 * kappa;
    cfg.set("field_mt", a.field_mt);
    cfg.set("drive_ghz", angular_to_ghz(drive_freq));

    let bound = max_stable_dt(res, mag, g, b, drive_freq)?;
    let dt = a.dt_ns.map_or(0.9 * bound, |v| v * 1e-9);
    if dt > bound {
        return Err(Failure::usage(format!(
            "time step {:.6} ns exceeds the stability bound; use --dt-ns <= {:.6}",
            dt * 1e9,
            bound * 1e9
        )));
    }
    let tau = 2.0 / kappa;
    let t_on = a.t_on_ns.map_or((10.0 * tau / dt).round() * dt, |v| v * 1e-9);
    let settle = 10.0 / kappa_other;
    let span = if detuned { (6.0 * tau).max(4.0 * std::f64::consts::TAU / (drive_freq - w_branch).abs()) } else { 6.0 * tau };
    let t_total = a.t_total_ns.map_or(t_on + settle + span, |v| v * 1e-9);
    if t_total < t_on {
        return Err(Failure::usage(format!(
            "trace length {:.3} ns is shorter than the pulse ({:.3} ns)",
            t_total * 1e9,
            t_on * 1e9
        )));
    }
    let drive = RingdownDrive { drive_freq, amplitude: a.amplitude, t_on, t_total, dt };
    let trace = simulate_ringdown(res, mag, g, b, &drive)?;

    let digest = sha256_hex(serde_json::to_string(&drive).map_err(|e| Failure::usage(e.to_string()))?.as_bytes());
    let f = File::create(&a.out).map_err(|e| Failure::usage(format!("cannot write {}: {e}", a.out.display())))?;
    write_trace(BufWriter::new(f), &trace, Some(&digest))?;

    let t_start = a.fit_start_ns.map_or(t_on + settle, |v| v * 1e-9);
    let fit = if detuned { fit_decaying_sinusoid(&trace, t_start)? } else { fit_exponential_decay(&trace, t_start)? };
    let tau_v = fit.values[1];
    let (tau_e, kappa_fit) = decay_rate_conversion(tau_v)?;
    let beat_mhz = detuned.then(|| fit.values[2] * 1e-6);
    let report = RingdownReport {
        field_t: b,
        drive_ghz: angular_to_ghz(drive_freq),
        drive_rad_s: drive_freq,
        dt_ns: dt * 1e9,
        dt_bound_ns: bound * 1e9,
        t_on_ns: t_on * 1e9,
        t_total_ns: t_total * 1e9,
        fit_start_ns: t_start * 1e9,
        tau_voltage_ns: tau_v * 1e9,
        tau_voltage_ns_err: fit.std_errors[1] * 1e9,
        tau_energy_ns: tau_e * 1e9,
        kappa_mhz: angular_to_mhz(kappa_fit),
        kappa_rad_s: kappa_fit,
        beat_mhz,
        model_kappa_plus_mhz: angular_to_mhz(kp),
        model_kappa_minus_mhz: angular_to_mhz(kl),
        fit,
    };
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json"));
    write_json(&report_path, &report)?;
    cfg.write_manifest(Some(&a.out), a.manifest.as_deref())?;

    println!("B0          = {:.3} mT, drive {:.6} GHz", a.field_mt, report.drive_ghz);
    println!("dt          = {:.4} ns (bound {:.4} ns)", report.dt_ns, report.dt_bound_ns);
    println!("tau_V       = {:.2} +/- {:.2} ns", report.tau_voltage_ns, report.tau_voltage_ns_err);
    println!("kappa/2pi   = {:.4} MHz ({:.6e} rad/s)", report.kappa_mhz, report.kappa_rad_s);
    if let Some(f) = report.beat_mhz {
        println!("beat        = {f:.4} MHz");
    }
    println!("model       = kappa+/2pi {:.4} MHz, kappa-/2pi {:.4} MHz", report.model_kappa_plus_mhz, report.model_kappa_minus_mhz);
    for d in &report.fit.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
