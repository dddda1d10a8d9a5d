//! Cavity-magnon hybrid modeling: dispersion, transmission, spectroscopic
//! fitting, ring-down simulation and sweep I/O.

pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod lsq;
pub mod manifest;
pub mod params;
pub mod pipeline;
pub mod ringdown;
pub mod sweep;
pub mod sweep_map;
pub mod transmission;
pub mod units;

pub use config::DeviceConfig;
pub use constants::PhysicalConstants;
pub use dynamics::{
    branch_linewidths, build_hamiltonian, complex_branch_frequencies, coupled_branch_frequencies,
    eigenspectrum, exchange_mode_frequency, kittel_frequency, write_eigenspectra, BranchPair,
    EigenSpectrum,
};
pub use error::{Error, Result};
pub use fit::{
    cooperativity, extract_branches, fit_avoided_crossing, fit_branch_dispersion, fit_field_calibration,
    fit_resonance, CrossingFit, DispersionFit, FitResult,
};
pub use manifest::{sha256_hex, Manifest};
pub use params::{CouplingModel, CouplingRule, MagnonParams, ResonatorParams};
pub use pipeline::{analyze_sweep, PipelineOptions, PipelineReport};
pub use ringdown::{fit_decaying_sinusoid, fit_exponential_decay, simulate_ringdown, RingdownDrive, RingdownTrace};
pub use sweep::{run_sweep, synthesize_acceptance_dataset, SweepPlan};
pub use sweep_map::{SweepData, SweepMap, SweepMeta};
pub use transmission::{s21_bare, s21_coupled, stitch_background, BackgroundSegment, BareResonanceModel, HybridLine};
pub use num_complex::Complex64;
