//! Spectroscopic parameter extraction: single resonances, hybrid branches,
//! avoided crossings, damping rates and derived figures of merit.

mod branches;
mod calibration;
mod crossing;
mod estimators;
mod kappa;
mod linewidth;
mod resonance;
mod result;

pub use branches::{
    extract_branches, predicted_windows, Branch, BranchPoint, BranchRow, BranchTable, BranchWindow, FieldWindows,
    SkippedBranch,
};
pub use calibration::{fit_field_calibration, resonance_field, FieldCalibration};
pub use crossing::{
    dispersion_guess, fit_avoided_crossing, fit_avoided_crossing_weighted, fit_branch_dispersion, CrossingFit, DispersionFit, DispersionGuess,
};
pub use estimators::{
    cone_angle, cooperativity, estimate_collective_coupling, estimate_single_spin_coupling, photon_number,
};
pub use kappa::{interpolate_kappa_r, kappa_m_from_branches, resonator_kappa_from_branch};
pub use linewidth::{fit_branch_linewidths, LinewidthFit, LINEWIDTH_PARAMS};
pub use resonance::{
    estimate_dip, fit_resonance, point_noise, resonance_model, DipEstimate, ResidualMode, ResonanceFitOptions,
    ResonanceTrace, RESONANCE_PARAMS,
};
pub use result::FitResult;
