//! Two-dimensional (field, frequency) transmission map.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell values of a [`SweepMap`], row-major over (field, frequency).
#[derive(Debug, Clone, PartialEq)]
pub enum SweepData {
    Complex(Vec<Complex64>),
    /// `20 log10 |S21|` when only magnitudes were recorded.
    MagnitudeDb(Vec<f64>),
}

impl SweepData {
    pub fn len(&self) -> usize {
        match self {
            SweepData::Complex(v) => v.len(),
            SweepData::MagnitudeDb(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Free-form acquisition metadata carried in the sidecar file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Transmission sampled on a field x frequency grid.
///
/// The frequency axis is kept in Hz, the unit it is recorded and exported in,
/// so that file round-trips are exact; [`SweepMap::omega`] gives angular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMap {
    fields: Vec<f64>,
    freqs_hz: Vec<f64>,
    data: SweepData,
    pub meta: SweepMeta,
}

fn strictly_monotonic(axis: &[f64]) -> bool {
    let inc = axis.windows(2).all(|w| w[1] > w[0]);
    let dec = axis.windows(2).all(|w| w[1] < w[0]);
    axis.iter().all(|v| v.is_finite()) && (inc || dec)
}

impl SweepMap {
    pub fn new(fields: Vec<f64>, freqs_hz: Vec<f64>, data: SweepData, meta: SweepMeta) -> Result<Self> {
        if fields.is_empty() || freqs_hz.is_empty() {
            return Err(Error::invalid("sweep axes must be non-empty"));
        }
        if !strictly_monotonic(&fields) {
            return Err(Error::invalid("field axis is not strictly monotonic"));
        }
        if !strictly_monotonic(&freqs_hz) {
            return Err(Error::invalid("frequency axis is not strictly monotonic"));
        }
        let expected = fields.len() * freqs_hz.len();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "sweep has {} cells, expected {} x {} = {expected}",
                data.len(),
                fields.len(),
                freqs_hz.len()
            )));
        }
        Ok(Self {
            fields,
            freqs_hz,
            data,
            meta,
        })
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn omega(&self, j: usize) -> f64 {
        self.freqs_hz[j] * TAU
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.freqs_hz.iter().map(|f| f * TAU).collect()
    }

    pub fn data(&self) -> &SweepData {
        &self.data
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, SweepData::Complex(_))
    }

    /// Complex value of a cell; magnitude-only maps return a real number.
    pub fn s21(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.freqs_hz.len() + j;
        match &self.data {
            SweepData::Complex(v) => v[k],
            SweepData::MagnitudeDb(v) => Complex64::new(10f64.powf(v[k] / 20.0), 0.0),
        }
    }

    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.s21(i, j).norm()
    }

    pub fn row(&self, i: usize) -> Vec<Complex64> {
        (0..self.n_freqs()).map(|j| self.s21(i, j)).collect()
    }

    /// Index of the field equal to `b` within `tol` tesla.
    pub fn field_index(&self, b: f64, tol: f64) -> Option<usize> {
        self.fields
            .iter()
            .enumerate()
            .filter(|(_, f)| (**f - b).abs() <= tol)
            .min_by(|a, b2| (a.1 - b).abs().total_cmp(&(b2.1 - b).abs()))
            .map(|(i, _)| i)
    }

    /// Divides every row by `background` (one value per frequency).
    pub fn normalized(&self, background: &[Complex64]) -> Result<SweepMap> {
        if background.len() != self.n_freqs() {
            return Err(Error::invalid("background length does not match frequency axis"));
        }
        if background.iter().any(|b| !(b.norm() > 0.0)) {
            return Err(Error::domain("background has a zero-magnitude sample"));
        }
        let nf = self.n_freqs();
        let data = match &self.data {
            SweepData::Complex(v) => SweepData::Complex(
                v.iter()
                    .enumerate()
                    .map(|(k, s)| s / background[k % nf])
                    .collect(),
            ),
            SweepData::MagnitudeDb(v) => SweepData::MagnitudeDb(
                v.iter()
                    .enumerate()
                    .map(|(k, db)| db - 20.0 * background[k % nf].norm().log10())
                    .collect(),
            ),
        };
        SweepMap::new(self.fields.clone(), self.freqs_hz.clone(), data, self.meta.clone())
    }
}
