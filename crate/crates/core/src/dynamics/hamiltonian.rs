//! Single-excitation Hamiltonian of a resonator coupled to the uniform magnon
//! mode and a ladder of thickness-quantized spin waves.
//!
//! Basis order: resonator, uniform magnon, then spin waves `n = 1..=n_max`.
//! Magnon modes couple only to the resonator, so the matrix is an arrowhead.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::dispersion::exchange_mode_frequency;
use crate::error::{Error, Result};
use crate::params::{CouplingModel, MagnonParams, ResonatorParams};
use crate::units::angular_to_ghz;

/// Eigenvalues (ascending, rad/s) and resonator participation of each eigenstate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub field_b0: f64,
    pub eigenvalues: Vec<f64>,
    pub resonator_weights: Vec<f64>,
}

impl EigenSpectrum {
    /// Index of the eigenstate with the largest resonator weight.
    pub fn most_photonic(&self) -> usize {
        self.resonator_weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

pub fn build_hamiltonian(
    b0: f64,
    resonator: &ResonatorParams,
    magnon: &MagnonParams,
    coupling: &CouplingModel,
) -> Result<DMatrix<f64>> {
    coupling.validate()?;
    let dim = coupling.n_max + 2;
    let mut h = DMatrix::zeros(dim, dim);
    h[(0, 0)] = resonator.omega_r(b0);
    for n in 0..=coupling.n_max {
        let idx = n + 1;
        h[(idx, idx)] = exchange_mode_frequency(n, b0, magnon)?;
        let g = coupling.g_n(n);
        h[(0, idx)] = g;
        h[(idx, 0)] = g;
    }
    Ok(h)
}

/// Diagonalizes a real-symmetric `h`.
pub fn eigenspectrum(h: &DMatrix<f64>, b0: f64) -> Result<EigenSpectrum> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::invalid("Hamiltonian must be a non-empty square matrix"));
    }
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (h - h.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let resonator_weights = order
        .iter()
        .map(|&i| eig.eigenvectors[(0, i)].powi(2))
        .collect();
    Ok(EigenSpectrum {
        field_b0: b0,
        eigenvalues,
        resonator_weights,
    })
}

/// Writes `field_t,eigenvalue_ghz,resonator_weight`, one row per eigenstate per field.
pub fn write_eigenspectra<W: Write>(out: W, spectra: &[EigenSpectrum]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["field_t", "eigenvalue_ghz", "resonator_weight"])
        .map_err(map)?;
    for s in spectra {
        for (ev, wt) in s.eigenvalues.iter().zip(&s.resonator_weights) {
            w.write_record([
                format!("{:.16e}", s.field_b0),
                format!("{:.16e}", angular_to_ghz(*ev)),
                format!("{:.16e}", wt),
            ])
            .map_err(map)?;
        }
    }
    w.flush().map_err(|e| Error::io("eigenspectrum output", e))?;
    Ok(())
}
