use std::path::{Path, PathBuf};

use cavimag::fit::{fit_resonance, ResidualMode, ResonanceFitOptions, ResonanceTrace};
use cavimag::lsq::MultiStart;
use cavimag::pipeline::NominalModel;
use cavimag::sweep::{read_sweep, GroundTruth};
use cavimag::units::{angular_to_ghz, angular_to_mhz, ghz_to_angular};
use cavimag::{analyze_sweep, BackgroundSegment, DeviceConfig, FitResult, PipelineOptions, PipelineReport, SweepMap};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use crate::context::{read_json, write_json, CliResult, CommandConfig, DeviceArgs, Failure};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV to analyze.
    #[arg(long, value_name = "PATH")]
    pub sweep: PathBuf,
    /// Fit the single resonance in the row at this field instead of the full analysis.
    #[arg(long, value_name = "MT")]
    pub field_mt: Option<f64>,
    /// Lower edge of the single-resonance window.
    #[arg(long, value_name = "GHZ", requires = "field_mt")]
    pub lo_ghz: Option<f64>,
    /// Upper edge of the single-resonance window.
    #[arg(long, value_name = "GHZ", requires = "field_mt")]
    pub hi_ghz: Option<f64>,
    /// Fit real and imaginary parts instead of the magnitude.
    #[arg(long, requires = "field_mt")]
    pub complex: bool,
    #[command(flatten)]
    pub device: DeviceArgs,
    /// Ground-truth file of a synthesized dataset; supplies background segments and a nominal device.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Background segments `LO_GHZ:HI_GHZ:REF_MT`, comma separated.
    #[arg(long, value_name = "LIST", conflicts_with = "truth")]
    pub segments: Option<String>,
    /// Seed of the multistart schedule.
    #[arg(long, default_value_t = PipelineOptions::default().seed)]
    pub seed: u64,
    /// JSON report; written even when the fit fails.
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// Manifest path; defaults to `<report>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ResonanceReport {
    status: &'static str,
    field_t: f64,
    omega_res_ghz: f64,
    omega_res_ghz_err: f64,
    omega_res_rad_s: f64,
    q_loaded: f64,
    q_loaded_err: f64,
    q_coupling_abs: f64,
    q_coupling_abs_err: f64,
    phi_rad: f64,
    attenuation_a: f64,
    fit: FitResult,
}

#[derive(Debug, Serialize)]
struct CoupledReport {
    status: &'static str,
    g_mhz: f64,
    g_mhz_err: f64,
    kappa_r_mhz: f64,
    kappa_r_mhz_err: f64,
    kappa_m_mhz: f64,
    kappa_m_mhz_err: f64,
    cooperativity: f64,
    cooperativity_err: f64,
    b_res_t: f64,
    b_res_t_err: f64,
    mu0_meff_mt: f64,
    mu0_meff_mt_err: f64,
    /// Everything in SI and angular units.
    detail: PipelineReport,
}

pub fn run(a: FitArgs) -> CliResult<()> {
    let mut cfg = CommandConfig::new("fit");
    cfg.seed = Some(a.seed);
    cfg.inputs.push(a.sweep.clone());
    let outcome = analyze(&a, &mut cfg);
    if let Err(f) = &outcome {
        // Leave a report behind so batch runs can see what went wrong.
        let partial = json!({
            "status": "failed",
            "exit_code": f.exit_code(),
            "error": f.to_string(),
            "sweep": a.sweep.display().to_string(),
        });
        write_json(&a.report, &partial)?;
    }
    cfg.write_manifest(Some(&a.report), a.manifest.as_deref())?;
    outcome
}

fn analyze(a: &FitArgs, cfg: &mut CommandConfig) -> CliResult<()> {
    let sweep = read_sweep(&a.sweep)?;
    if sweep.n_fields() == 0 || sweep.n_freqs() == 0 {
        return Err(Failure::usage(format!("{} holds no data", a.sweep.display())));
    }
    match a.field_mt {
        Some(b_mt) => single(a, &sweep, b_mt * 1e-3),
        None => coupled(a, cfg, &sweep),
    }
}

fn single(a: &FitArgs, sweep: &SweepMap, b: f64) -> CliResult<()> {
    let i = sweep
        .field_index(b, 1e-9)
        .ok_or_else(|| Failure::usage(format!("no row at {} mT in {}", b * 1e3, a.sweep.display())))?;
    let omegas = sweep.omegas();
    let trace = if a.complex {
        if !sweep.is_complex() {
            return Err(Failure::usage("--complex needs a complex sweep"));
        }
        ResonanceTrace::Complex { omegas, s21: sweep.row(i) }
    } else {
        let magnitude = (0..sweep.n_freqs()).map(|j| sweep.magnitude(i, j)).collect();
        ResonanceTrace::Magnitude { omegas, magnitude }
    };
    let lo = a.lo_ghz.map_or(f64::NEG_INFINITY, ghz_to_angular);
    let hi = a.hi_ghz.map_or(f64::INFINITY, ghz_to_angular);
    let trace = trace.window(lo, hi);
    let opts = ResonanceFitOptions {
        mode: if a.complex { ResidualMode::Complex } else { ResidualMode::Magnitude },
        schedule: MultiStart { seed: a.seed, ..MultiStart::default() },
        ..Default::default()
    };
    let fit = fit_resonance(&trace, &opts)?;
    let v = |k: &str| fit.get(k).unwrap_or(f64::NAN);
    let e = |k: &str| fit.error(k).unwrap_or(f64::NAN);
    let report = ResonanceReport {
        status: if fit.converged { "ok" } else { "not_converged" },
        field_t: sweep.fields()[i],
        omega_res_ghz: angular_to_ghz(v("omega_res")),
        omega_res_ghz_err: angular_to_ghz(e("omega_res")),
        omega_res_rad_s: v("omega_res"),
        q_loaded: v("q_loaded"),
        q_loaded_err: e("q_loaded"),
        q_coupling_abs: v("q_coupling_abs"),
        q_coupling_abs_err: e("q_coupling_abs"),
        phi_rad: v("phi"),
        attenuation_a: v("a"),
        fit,
    };
    write_json(&a.report, &report)?;
    println!("B0          = {:.4} mT", report.field_t * 1e3);
    println!("omega_res   = {:.6} +/- {:.6} GHz ({:.6e} rad/s)", report.omega_res_ghz, report.omega_res_ghz_err, report.omega_res_rad_s);
    println!("Q_l         = {:.1} +/- {:.1}", report.q_loaded, report.q_loaded_err);
    println!("|Q_c|       = {:.1} +/- {:.1}", report.q_coupling_abs, report.q_coupling_abs_err);
    println!("phi         = {:.4} rad", report.phi_rad);
    if !report.fit.converged {
        return Err(Failure::Numerical(format!("resonance fit did not converge: {}", report.fit.diagnostics.join("; "))));
    }
    Ok(())
}

fn parse_segments(list: &str) -> CliResult<Vec<BackgroundSegment>> {
    list.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
            match nums.as_deref() {
                Some(&[lo, hi, b]) => Ok(BackgroundSegment { omega_lo: ghz_to_angular(lo), omega_hi: ghz_to_angular(hi), b_ref: b * 1e-3 }),
                _ => Err(Failure::usage(format!("segments: `{item}` is not LO_GHZ:HI_GHZ:REF_MT"))),
            }
        })
        .collect()
}

fn nominal_device(a: &FitArgs, cfg: &mut CommandConfig, truth: Option<&GroundTruth>) -> CliResult<DeviceConfig> {
    if a.device.is_set() {
        return a.device.load(cfg);
    }
    match truth {
        Some(t) => Ok(DeviceConfig::from_json(&t.device, t.b_res_t)?),
        None => Err(Failure::usage("the coupled analysis needs a nominal device: pass --device, --preset or --truth")),
    }
}

fn load_truth(path: &Path, cfg: &mut CommandConfig) -> CliResult<GroundTruth> {
    cfg.inputs.push(path.to_path_buf());
    read_json(path)
}

fn coupled(a: &FitArgs, cfg: &mut CommandConfig, sweep: &SweepMap) -> CliResult<()> {
    let truth = a.truth.as_deref().map(|p| load_truth(p, cfg)).transpose()?;
    let segments = match (&truth, &a.segments) {
        (Some(t), _) => t
            .background_segments
            .iter()
            .map(|s| BackgroundSegment { omega_lo: ghz_to_angular(s[0]), omega_hi: ghz_to_angular(s[1]), b_ref: s[2] })
            .collect(),
        (None, Some(list)) => parse_segments(list)?,
        (None, None) => return Err(Failure::usage("the coupled analysis needs background segments: pass --segments or --truth")),
    };
    let device = nominal_device(a, cfg, truth.as_ref())?;
    let fields = sweep.fields();
    let mid = 0.5 * (fields[0] + fields[fields.len() - 1]);
    let nominal = NominalModel::from_device(&device, mid);
    let opts = PipelineOptions { seed: a.seed, ..PipelineOptions::default() };
    let r = analyze_sweep(sweep, &segments, &nominal, &opts)?;
    let report = CoupledReport {
        status: "ok",
        g_mhz: angular_to_mhz(r.g),
        g_mhz_err: angular_to_mhz(r.g_err),
        kappa_r_mhz: angular_to_mhz(r.kappa_r_at_res),
        kappa_r_mhz_err: angular_to_mhz(r.kappa_r_err),
        kappa_m_mhz: angular_to_mhz(r.kappa_m),
        kappa_m_mhz_err: angular_to_mhz(r.kappa_m_err),
        cooperativity: r.cooperativity,
        cooperativity_err: r.cooperativity_err,
        b_res_t: r.b_res,
        b_res_t_err: r.b_res_err,
        mu0_meff_mt: r.mu0_meff * 1e3,
        mu0_meff_mt_err: r.mu0_meff_err * 1e3,
        detail: r,
    };
    write_json(&a.report, &report)?;
    println!("g/2pi       = {:.3} +/- {:.3} MHz ({:.6e} rad/s)", report.g_mhz, report.g_mhz_err, report.detail.g);
    println!("kappa_r/2pi = {:.4} +/- {:.4} MHz ({:.6e} rad/s)", report.kappa_r_mhz, report.kappa_r_mhz_err, report.detail.kappa_r_at_res);
    println!("kappa_m/2pi = {:.3} +/- {:.3} MHz ({:.6e} rad/s)", report.kappa_m_mhz, report.kappa_m_mhz_err, report.detail.kappa_m);
    println!("C           = {:.1} +/- {:.1}", report.cooperativity, report.cooperativity_err);
    println!("B_res       = {:.4} +/- {:.4} mT", report.b_res_t * 1e3, report.b_res_t_err * 1e3);
    for d in &report.detail.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
