//! Sweep orchestration, seeded noise, acceptance datasets and file I/O.

mod dataset;
mod io;
mod noise;
mod plan;

pub use dataset::{
    acceptance_plan, device_preset, synthesize_acceptance_dataset, synthesize_calibration_points, AcceptanceDataset, GroundTruth, DEVICE_IDS,
};
pub use io::{meta_path, read_sweep, read_sweep_csv, write_sweep, write_sweep_csv};
pub use noise::{cell_rng, apply_amplitude_noise};
pub use plan::{run_sweep, run_sweep_with_budget, Background, OutputKind, SweepModel, SweepOutput, SweepPlan, DEFAULT_CELL_BUDGET};
