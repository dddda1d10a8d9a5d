use std::f64::consts::TAU;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::noise::cell_rng;
use super::plan::{run_sweep, Background, OutputKind, SweepModel, SweepOutput, SweepPlan};
use crate::config::DeviceConfig;
use crate::constants::PhysicalConstants;
use crate::dynamics::kittel_frequency;
use crate::error::{Error, Result};
use crate::fit::{cooperativity, resonance_field};
use crate::params::{CouplingModel, MagnonParams, ResonatorParams};
use crate::sweep_map::SweepMap;
use crate::transmission::BackgroundSegment;
use crate::units::{angular_to_ghz, angular_to_mhz, ghz_to_angular, mhz_to_angular, mt_to_tesla, tesla_to_mt};

pub const DEVICE_IDS: [&str; 2] = ["3.6GHz", "9.2GHz"];

/// Parameters behind a synthetic dataset, in reporting units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub device_id: String,
    pub seed: u64,
    pub noise_fraction: f64,
    pub g_mhz: f64,
    pub kappa_m_mhz: f64,
    pub kappa_r_mhz: f64,
    pub mu0_meff_mt: f64,
    pub b_res_t: f64,
    pub omega_r0_ghz: f64,
    pub gamma_r_mhz_per_t: f64,
    pub kappa_ext_mhz: f64,
    pub cooperativity: f64,
    /// Background segments as `[lo_ghz, hi_ghz, b_ref_t]`.
    pub background_segments: Vec<[f64; 3]>,
    pub device: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct AcceptanceDataset {
    pub sweep: SweepMap,
    pub truth: GroundTruth,
    pub device: DeviceConfig,
    pub plan: SweepPlan,
    pub segments: Vec<BackgroundSegment>,
}

fn b_res_of(res: &ResonatorParams, mag: &MagnonParams, lo: f64, hi: f64) -> Result<f64> {
    let f = |b: f64| -> Result<f64> { Ok(kittel_frequency(b, mag)? - res.omega_r(b)) };
    let (mut a, mut b) = (lo, hi);
    if f(a)?.signum() == f(b)?.signum() {
        return Err(Error::invalid("no resonance crossing in the bracket"));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m)?.signum() == f(a)?.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

struct Preset {
    gamma_ghz: f64,
    meff_mt: f64,
    g_mhz: f64,
    kappa_m_mhz: f64,
    /// Resonator damping at the crossing.
    kappa_r_res_mhz: f64,
    gamma_r_mhz: f64,
    /// Anchor field and damping for the linear damping model.
    kappa_anchor: Option<(f64, f64)>,
    q_c: f64,
    n_spins: f64,
}

fn build(id: &str, p: Preset, omega_r0: Option<f64>, b_res: Option<f64>) -> Result<DeviceConfig> {
    let magnon = MagnonParams {
        gamma: ghz_to_angular(p.gamma_ghz),
        mu0_meff: mt_to_tesla(p.meff_mt),
        lambda_ex_sq: 0.25e-16,
        thickness: 300e-9,
        kappa_m: mhz_to_angular(p.kappa_m_mhz),
        ms_field: 0.0,
        volume: 0.0,
        n_spins: p.n_spins,
    };
    let gamma_r = mhz_to_angular(p.gamma_r_mhz);
    // Either the zero-field frequency is given, or it follows from a prescribed crossing field.
    let (omega_r0, b_res) = match (omega_r0, b_res) {
        (Some(w0), _) => {
            let probe = ResonatorParams {
                omega_r0: w0,
                gamma_r,
                kappa_r0: 1.0,
                kappa_r_slope: 0.0,
                b_ref: 0.0,
                kappa_ext: 0.0,
                phi: 0.0,
                attenuation_a: 1.0,
                z_r: f64::NAN,
                wire_width: f64::NAN,
            };
            (w0, b_res_of(&probe, &magnon, 0.01, 2.0)?)
        }
        (None, Some(b)) => (kittel_frequency(b, &magnon)? - gamma_r * b, b),
        (None, None) => unreachable!("preset defines the resonator line"),
    };
    let kr_res = mhz_to_angular(p.kappa_r_res_mhz);
    let (b_ref, kappa_r0, slope) = match p.kappa_anchor {
        Some((b_ref, k_mhz)) => {
            let k0 = mhz_to_angular(k_mhz);
            (b_ref, k0, (kr_res - k0) / (b_res - b_ref))
        }
        None => (b_res, kr_res, 0.0),
    };
    let w_res = omega_r0 + gamma_r * b_res;
    let resonator = ResonatorParams {
        omega_r0,
        gamma_r,
        kappa_r0,
        kappa_r_slope: slope,
        b_ref,
        kappa_ext: w_res / p.q_c,
        phi: 0.0,
        attenuation_a: 1.0,
        z_r: 17.0,
        wire_width: 10e-6,
    };
    Ok(DeviceConfig {
        device_id: Some(id.to_string()),
        resonator,
        magnon,
        coupling: CouplingModel::uniform(mhz_to_angular(p.g_mhz)),
        temperature_k: None,
        drive_power_dbm: Some(-75.0),
    })
}

/// Parameter set of a named device.
pub fn device_preset(id: &str) -> Result<DeviceConfig> {
    match id {
        "3.6GHz" => build(
            id,
            Preset {
                gamma_ghz: 28.0,
                meff_mt: 53.614,
                g_mhz: 90.31,
                kappa_m_mhz: 30.62,
                kappa_r_res_mhz: 0.902,
                gamma_r_mhz: -50.0,
                kappa_anchor: Some((0.0809, 0.8377)),
                q_c: 11200.0,
                n_spins: 2.195e12,
            },
            None,
            Some(0.103429),
        ),
        "9.2GHz" => build(
            id,
            Preset {
                gamma_ghz: 28.0,
                meff_mt: 72.40,
                g_mhz: 147.21,
                kappa_m_mhz: 117.7,
                kappa_r_res_mhz: 7.917,
                gamma_r_mhz: -71.7,
                kappa_anchor: None,
                q_c: 4000.0,
                n_spins: 0.0,
            },
            Some(ghz_to_angular(9.2529)),
            None,
        ),
        other => Err(Error::UnknownDevice(other.to_string())),
    }
}

/// Sweep plan and background segments of a named dataset.
pub fn acceptance_plan(id: &str, seed: u64) -> Result<(SweepPlan, Vec<BackgroundSegment>)> {
    let seg = |lo: f64, hi: f64, b: f64| BackgroundSegment { omega_lo: ghz_to_angular(lo), omega_hi: ghz_to_angular(hi), b_ref: b };
    match id {
        "3.6GHz" => Ok((
            SweepPlan {
                field_start: 0.0809,
                field_stop: 0.1281,
                field_step: 1e-4,
                freq_start: ghz_to_angular(3.40),
                freq_stop: ghz_to_angular(3.74),
                freq_step: mhz_to_angular(0.1),
                model: SweepModel::Coupled,
                noise_fraction: 0.01,
                seed,
                output: OutputKind::Complex,
                background: Background { amplitude: 0.8, tilt_per_hz: -0.3e-9, delay_s: 5e-9 },
            },
            vec![seg(3.40, 3.50, 0.0809), seg(3.50, 3.61, 0.1024), seg(3.61, 3.74, 0.0809)],
        )),
        "9.2GHz" => Ok((
            SweepPlan {
                field_start: 0.26,
                field_stop: 0.33,
                field_step: 2.5e-4,
                freq_start: ghz_to_angular(8.95),
                freq_stop: ghz_to_angular(9.55),
                freq_step: mhz_to_angular(0.25),
                model: SweepModel::Coupled,
                noise_fraction: 0.01,
                seed,
                output: OutputKind::Complex,
                background: Background { amplitude: 0.6, tilt_per_hz: -0.2e-9, delay_s: 4e-9 },
            },
            // The middle band is referenced at the crossing, where both
            // branches are pushed out of it; the outer bands at the field
            // ends, where the resonator line sits in the other band.
            vec![seg(8.95, 9.16, 0.26), seg(9.16, 9.30, 0.2955), seg(9.30, 9.55, 0.33)],
        )),
        other => Err(Error::UnknownDevice(other.to_string())),
    }
}

/// Noisy synthetic sweep of a named device plus the truth it was generated from.
pub fn synthesize_acceptance_dataset(id: &str, seed: u64) -> Result<AcceptanceDataset> {
    let device = device_preset(id)?;
    let (plan, segments) = acceptance_plan(id, seed)?;
    let SweepOutput::Map(sweep) = run_sweep(&plan, &device)? else {
        unreachable!("coupled plans produce maps");
    };
    let r = &device.resonator;
    let m = &device.magnon;
    let b_res = b_res_of(r, m, plan.field_start, plan.field_stop)?;
    let g = device.coupling.g_uniform;
    let truth = GroundTruth {
        device_id: id.to_string(),
        seed,
        noise_fraction: plan.noise_fraction,
        g_mhz: angular_to_mhz(g),
        kappa_m_mhz: angular_to_mhz(m.kappa_m),
        kappa_r_mhz: angular_to_mhz(r.kappa_r(b_res)),
        mu0_meff_mt: tesla_to_mt(m.mu0_meff),
        b_res_t: b_res,
        omega_r0_ghz: angular_to_ghz(r.omega_r0),
        gamma_r_mhz_per_t: angular_to_mhz(r.gamma_r),
        kappa_ext_mhz: angular_to_mhz(r.kappa_ext),
        cooperativity: cooperativity(g, r.kappa_r(b_res), m.kappa_m)?,
        background_segments: segments
            .iter()
            .map(|s| [s.omega_lo / TAU / 1e9, s.omega_hi / TAU / 1e9, s.b_ref])
            .collect(),
        device: device.to_json(),
    };
    Ok(AcceptanceDataset { sweep, truth, device, plan, segments })
}

/// Spin-resonance calibration points `(coil current A, omega rad/s)` at
/// 4.5 to 8.5 GHz in 0.5 GHz steps for a reference sample with `g_factor`,
/// a coil of `slope_t_per_a` through the origin, and Gaussian field noise
/// of `noise_t` standard deviation.
pub fn synthesize_calibration_points(
    slope_t_per_a: f64,
    g_factor: f64,
    noise_t: f64,
    seed: u64,
    consts: &PhysicalConstants,
) -> Result<Vec<(f64, f64)>> {
    if !(slope_t_per_a > 0.0) || !(g_factor > 0.0) || !(noise_t >= 0.0) {
        return Err(Error::domain("calibration slope and g-factor must be positive, noise non-negative"));
    }
    Ok((0..=8)
        .map(|k| {
            let omega = ghz_to_angular(4.5 + 0.5 * k as f64);
            let n: f64 = StandardNormal.sample(&mut cell_rng(seed, k, 0));
            let b = resonance_field(omega, g_factor, consts) + noise_t * n;
            (b / slope_t_per_a, omega)
        })
        .collect())
}
