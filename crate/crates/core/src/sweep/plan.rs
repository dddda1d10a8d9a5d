use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::apply_amplitude_noise;
use crate::config::DeviceConfig;
use crate::dynamics::{build_hamiltonian, eigenspectrum, EigenSpectrum};
use crate::error::{Error, Result};
use crate::sweep_map::{SweepData, SweepMap, SweepMeta};
use crate::transmission::{s21_bare, BareResonanceModel, HybridLine};

/// Cells allowed in one sweep unless the caller raises the budget.
pub const DEFAULT_CELL_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepModel {
    Bare,
    Coupled,
    MultimodeEigen,
}

impl SweepModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bare => "bare",
            Self::Coupled => "coupled",
            Self::MultimodeEigen => "multimode-eigen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    #[default]
    Complex,
    Db,
}

/// Field-independent feedline background `amplitude (1 + tilt (f - f_start)) e^{-i 2 pi f delay}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub amplitude: f64,
    /// Relative slope per Hz.
    pub tilt_per_hz: f64,
    pub delay_s: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self { amplitude: 1.0, tilt_per_hz: 0.0, delay_s: 0.0 }
    }
}

impl Background {
    pub fn at(&self, f_hz: f64, f_start_hz: f64) -> Complex64 {
        self.amplitude * (1.0 + self.tilt_per_hz * (f_hz - f_start_hz)) * Complex64::from_polar(1.0, -TAU * f_hz * self.delay_s)
    }
}

/// Field and frequency grid plus model and noise selection. Frequencies in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub field_start: f64,
    pub field_stop: f64,
    pub field_step: f64,
    pub freq_start: f64,
    pub freq_stop: f64,
    pub freq_step: f64,
    pub model: SweepModel,
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputKind,
    #[serde(default)]
    pub background: Background,
}

fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| start + k as f64 * step).collect()
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.field_start, self.field_stop, self.field_step, self.freq_start, self.freq_stop, self.freq_step]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("plan contains non-finite values"));
        }
        if !(self.field_step > 0.0 && self.freq_step > 0.0) {
            return Err(Error::invalid("plan steps must be positive"));
        }
        if self.field_stop < self.field_start || self.freq_stop < self.freq_start {
            return Err(Error::invalid("plan ranges must be non-empty (stop >= start)"));
        }
        if self.field_start < 0.0 {
            return Err(Error::domain("fields must be non-negative"));
        }
        if !(self.freq_start > 0.0) {
            return Err(Error::domain("frequencies must be positive"));
        }
        if !(self.noise_fraction >= 0.0) {
            return Err(Error::invalid("noise fraction must be non-negative"));
        }
        Ok(())
    }

    pub fn fields(&self) -> Vec<f64> {
        axis(self.field_start, self.field_stop, self.field_step)
    }

    /// Frequency axis in Hz (the stored axis of a sweep map).
    pub fn freqs_hz(&self) -> Vec<f64> {
        axis(self.freq_start / TAU, self.freq_stop / TAU, self.freq_step / TAU)
    }

    pub fn cells(&self) -> usize {
        self.fields().len() * self.freqs_hz().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Map(SweepMap),
    Spectra(Vec<EigenSpectrum>),
}

pub fn run_sweep(plan: &SweepPlan, device: &DeviceConfig) -> Result<SweepOutput> {
    run_sweep_with_budget(plan, device, DEFAULT_CELL_BUDGET)
}

/// Evaluates the plan's model on its grid. Rows are computed in parallel;
/// noise is drawn per cell from `(seed, i, j)` so the result is independent
/// of scheduling.
pub fn run_sweep_with_budget(plan: &SweepPlan, device: &DeviceConfig, budget: usize) -> Result<SweepOutput> {
    plan.validate()?;
    let fields = plan.fields();
    let res = &device.resonator;
    let mag = &device.magnon;
    if plan.model == SweepModel::MultimodeEigen {
        if fields.len() > budget {
            return Err(Error::GridTooLarge { cells: fields.len(), budget });
        }
        return fields
            .par_iter()
            .map(|&b| eigenspectrum(&build_hamiltonian(b, res, mag, &device.coupling)?, b))
            .collect::<Result<Vec<_>>>()
            .map(SweepOutput::Spectra);
    }
    let freqs = plan.freqs_hz();
    let cells = fields.len().checked_mul(freqs.len()).unwrap_or(usize::MAX);
    if cells > budget {
        return Err(Error::GridTooLarge { cells, budget });
    }
    res.validate_over(fields[0], fields[fields.len() - 1])?;
    mag.validate()?;
    let f0 = freqs[0];
    let bg: Vec<Complex64> = freqs.iter().map(|f| plan.background.at(*f, f0)).collect();
    let rows: Vec<Vec<Complex64>> = fields
        .par_iter()
        .enumerate()
        .map(|(i, &b)| -> Result<Vec<Complex64>> {
            let line = match plan.model {
                SweepModel::Coupled => Some(HybridLine::at_field(b, res, mag, device.coupling.g_uniform)?),
                _ => None,
            };
            let bare = BareResonanceModel::from_resonator(res, b);
            Ok(freqs
                .iter()
                .zip(&bg)
                .enumerate()
                .map(|(j, (f, bgj))| {
                    let w = TAU * f;
                    let z = match &line {
                        Some(l) => bgj * res.attenuation_a * l.response(w),
                        None => bgj * s21_bare(w, &bare),
                    };
                    apply_amplitude_noise(z, plan.noise_fraction, plan.seed, i, j)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    let data = match plan.output {
        OutputKind::Complex => SweepData::Complex(flat),
        OutputKind::Db => SweepData::MagnitudeDb(flat.iter().map(|z| 20.0 * z.norm().log10()).collect()),
    };
    let meta = SweepMeta {
        device_id: device.device_id.clone(),
        temperature_k: device.temperature_k,
        drive_power_dbm: device.drive_power_dbm,
        model: Some(plan.model.name().to_string()),
        noise_fraction: Some(plan.noise_fraction),
        seed: Some(plan.seed),
        ..Default::default()
    };
    SweepMap::new(fields, freqs, data, meta).map(SweepOutput::Map)
}
