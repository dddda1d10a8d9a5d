use std::collections::BTreeMap;
use std::path::PathBuf;

use cavimag::fit::{
    cone_angle, cooperativity, estimate_collective_coupling, estimate_single_spin_coupling, fit_field_calibration,
    photon_number,
};
use cavimag::units::{dbm_to_watts, ghz_to_angular, hz_to_angular};
use cavimag::PhysicalConstants;
use clap::Args;
use serde_json::{json, Value};

use crate::context::{write_json, CliResult, CommandConfig, Failure};

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Single-spin coupling from the resonator impedance and wire width.
    #[arg(long)]
    pub gs: bool,
    /// Collective coupling g_s sqrt(N).
    #[arg(long)]
    pub collective: bool,
    /// Mean photon number in the resonator.
    #[arg(long)]
    pub photons: bool,
    /// Precession cone angle.
    #[arg(long)]
    pub cone: bool,
    /// Cooperativity 4 g^2 / (kappa_r kappa_m).
    #[arg(long)]
    pub cooperativity: bool,
    /// Coil calibration from a CSV of `current_a,freq_ghz` spin-resonance points.
    #[arg(long, value_name = "PATH")]
    pub calibration: Option<PathBuf>,

    /// Resonator impedance in ohm.
    #[arg(long)]
    pub zr: Option<f64>,
    /// Wire width in m.
    #[arg(long)]
    pub w: Option<f64>,
    /// Resonance frequency in Hz.
    #[arg(long)]
    pub fr: Option<f64>,
    /// Drive power at the resonator in dBm.
    #[arg(long, allow_negative_numbers = true)]
    pub p_dbm: Option<f64>,
    /// Loaded quality factor.
    #[arg(long)]
    pub ql: Option<f64>,
    /// Coupling quality factor |Q_c|.
    #[arg(long)]
    pub qc: Option<f64>,
    /// Magnon number.
    #[arg(long)]
    pub nm: Option<f64>,
    /// Number of spins.
    #[arg(long)]
    pub nspins: Option<f64>,
    /// Coupling g/2pi in MHz.
    #[arg(long)]
    pub g_mhz: Option<f64>,
    /// Resonator linewidth kappa_r/2pi in MHz.
    #[arg(long)]
    pub kappa_r_mhz: Option<f64>,
    /// Magnon linewidth kappa_m/2pi in MHz.
    #[arg(long)]
    pub kappa_m_mhz: Option<f64>,
    /// g-factor of the calibration sample.
    #[arg(long, default_value_t = 2.0036)]
    pub g_factor: f64,

    /// JSON report.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json`, else `cavimag-estimate.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

/// Collects every missing flag before failing.
struct Inputs<'a> {
    a: &'a EstimateArgs,
    missing: Vec<&'static str>,
}

impl Inputs<'_> {
    fn need(&mut self, flag: &'static str) -> f64 {
        let v = match flag {
            "--zr" => self.a.zr,
            "--w" => self.a.w,
            "--fr" => self.a.fr,
            "--p-dbm" => self.a.p_dbm,
            "--ql" => self.a.ql,
            "--qc" => self.a.qc,
            "--nm" => self.a.nm,
            "--nspins" => self.a.nspins,
            "--g-mhz" => self.a.g_mhz,
            "--kappa-r-mhz" => self.a.kappa_r_mhz,
            "--kappa-m-mhz" => self.a.kappa_m_mhz,
            _ => unreachable!("unknown estimator input {flag}"),
        };
        v.unwrap_or_else(|| {
            if !self.missing.contains(&flag) {
                self.missing.push(flag);
            }
            f64::NAN
        })
    }
}

fn read_calibration(path: &PathBuf) -> CliResult<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let num = |k: usize| rec.get(k).and_then(|s| s.trim().parse::<f64>().ok());
        match (num(0), num(1)) {
            (Some(i), Some(f)) => points.push((i, ghz_to_angular(f))),
            _ => return Err(Failure::usage(format!("{}: row {} is not `current_a,freq_ghz`", path.display(), n + 2))),
        }
    }
    Ok(points)
}

pub fn run(a: EstimateArgs) -> CliResult<()> {
    if !(a.gs || a.collective || a.photons || a.cone || a.cooperativity || a.calibration.is_some()) {
        return Err(Failure::usage(
            "nothing to estimate: pass one or more of --gs, --collective, --photons, --cone, --cooperativity, --calibration",
        ));
    }
    let mut cfg = CommandConfig::new("estimate");
    let consts = PhysicalConstants::default();
    let mut inp = Inputs { a: &a, missing: Vec::new() };
    // Gather inputs for every requested estimate first so one run reports all gaps.
    let gs_in = (a.gs || a.collective).then(|| (inp.need("--zr"), inp.need("--w"), inp.need("--fr")));
    let n_coll = a.collective.then(|| inp.need("--nspins"));
    let ph_in = a.photons.then(|| (inp.need("--p-dbm"), inp.need("--ql"), inp.need("--qc"), inp.need("--fr")));
    let cone_in = a.cone.then(|| (inp.need("--nm"), inp.need("--nspins")));
    let coop_in = a.cooperativity.then(|| (inp.need("--g-mhz"), inp.need("--kappa-r-mhz"), inp.need("--kappa-m-mhz")));
    if !inp.missing.is_empty() {
        return Err(Failure::usage(format!("missing inputs: {}", inp.missing.join(", "))));
    }

    let mut out: BTreeMap<&str, Value> = BTreeMap::new();
    if let Some((zr, w, fr)) = gs_in {
        let gs = estimate_single_spin_coupling(hz_to_angular(fr), zr, w, &consts)?;
        let gs_hz = gs / std::f64::consts::TAU;
        if a.gs {
            println!("g_s/2pi     = {gs_hz:.3} Hz ({gs:.3} rad/s)  [Z_r = {zr} ohm, w = {w:e} m, f_r = {fr:e} Hz]");
            out.insert("single_spin_coupling", json!({"hz": gs_hz, "rad_s": gs, "zr_ohm": zr, "w_m": w, "fr_hz": fr}));
        }
        if let Some(n) = n_coll {
            let g = estimate_collective_coupling(gs, n)?;
            let g_mhz = g / std::f64::consts::TAU * 1e-6;
            println!("g/2pi       = {g_mhz:.3} MHz ({g:.6e} rad/s)  [g_s/2pi = {gs_hz:.3} Hz, N = {n:e}]");
            out.insert("collective_coupling", json!({"mhz": g_mhz, "rad_s": g, "nspins": n}));
        }
    }
    if let Some((p_dbm, ql, qc, fr)) = ph_in {
        let p = dbm_to_watts(p_dbm);
        let n = photon_number(p, ql, qc, hz_to_angular(fr), &consts)?;
        println!("<n>         = {n:.4e}  [P = {p_dbm} dBm = {p:.4e} W, Q_l = {ql}, |Q_c| = {qc}, f_r = {fr:e} Hz]");
        out.insert("photon_number", json!({"value": n, "p_dbm": p_dbm, "p_w": p, "q_loaded": ql, "q_coupling_abs": qc, "fr_hz": fr}));
    }
    if let Some((nm, ns)) = cone_in {
        let theta = cone_angle(nm, ns)?;
        println!("theta       = {theta:.4e} rad ({:.4e} deg)  [n_m = {nm:e}, N = {ns:e}]", theta.to_degrees());
        out.insert("cone_angle", json!({"rad": theta, "deg": theta.to_degrees(), "nm": nm, "nspins": ns}));
    }
    if let Some((g, kr, km)) = coop_in {
        let c = cooperativity(g, kr, km)?;
        println!("C           = {c:.2}  [g/2pi = {g} MHz, kappa_r/2pi = {kr} MHz, kappa_m/2pi = {km} MHz]");
        out.insert("cooperativity", json!({"value": c, "g_mhz": g, "kappa_r_mhz": kr, "kappa_m_mhz": km}));
    }
    if let Some(path) = &a.calibration {
        cfg.inputs.push(path.clone());
        let points = read_calibration(path)?;
        let cal = fit_field_calibration(&points, a.g_factor, &consts)?;
        println!(
            "B(I)        = ({:.4} +/- {:.4}) mT/A * I + ({:.4} +/- {:.4}) mT  [{} points, g = {}]",
            cal.slope_t_per_a * 1e3,
            cal.slope_err * 1e3,
            cal.intercept_t * 1e3,
            cal.intercept_err * 1e3,
            points.len(),
            a.g_factor
        );
        out.insert(
            "field_calibration",
            json!({
                "slope_mt_per_a": cal.slope_t_per_a * 1e3,
                "slope_mt_per_a_err": cal.slope_err * 1e3,
                "intercept_mt": cal.intercept_t * 1e3,
                "intercept_mt_err": cal.intercept_err * 1e3,
                "g_factor": a.g_factor,
                "si": cal,
            }),
        );
    }
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    cfg.write_manifest(a.out.as_deref(), a.manifest.as_deref())?;
    Ok(())
}
