use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use cavimag::dynamics::write_eigenspectra;
use cavimag::sweep::{
    run_sweep_with_budget, synthesize_acceptance_dataset, write_sweep, SweepModel, SweepOutput, DEFAULT_CELL_BUDGET,
};
use clap::{Args, ValueEnum};

use crate::context::{read_json, sibling, write_json, CliResult, CommandConfig, DeviceArgs, Failure};
use crate::plan::PlanFile;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Bare,
    Coupled,
    MultimodeEigen,
}

impl From<ModelArg> for SweepModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Bare => SweepModel::Bare,
            ModelArg::Coupled => SweepModel::Coupled,
            ModelArg::MultimodeEigen => SweepModel::MultimodeEigen,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub device: DeviceArgs,
    /// Sweep plan (JSON; fields in mT, frequencies in GHz/MHz).
    #[arg(long, value_name = "PATH", required_unless_present = "dataset")]
    pub plan: Option<PathBuf>,
    /// Synthesize a named benchmark dataset (3.6GHz or 9.2GHz) and its ground truth instead.
    #[arg(long, value_name = "ID", conflicts_with_all = ["plan", "device", "preset", "model", "noise"])]
    pub dataset: Option<String>,
    /// Overrides the plan's model.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Overrides the plan's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the plan's relative noise amplitude.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Largest grid (fields x frequencies) to compute.
    #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
    pub max_cells: usize,
    /// Sweep CSV (sidecar `<out>.meta.json`) or eigenspectrum CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Ground-truth file for --dataset; defaults to `<out>.truth.json`.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

pub fn run(a: SimulateArgs) -> CliResult<()> {
    let mut cfg = CommandConfig::new("simulate");
    if let Some(id) = &a.dataset {
        let seed = a.seed.unwrap_or(0);
        cfg.seed = Some(seed);
        cfg.set("dataset", id);
        let ds = synthesize_acceptance_dataset(id, seed)?;
        write_sweep(&a.out, &ds.sweep)?;
        let truth_path = a.truth.clone().unwrap_or_else(|| sibling(&a.out, ".truth.json"));
        write_json(&truth_path, &ds.truth)?;
        let m = cfg.write_manifest(Some(&a.out), a.manifest.as_deref())?;
        println!(
            "wrote {} ({} fields x {} frequencies), {} and {}",
            a.out.display(),
            ds.sweep.n_fields(),
            ds.sweep.n_freqs(),
            truth_path.display(),
            m.display()
        );
        return Ok(());
    }

    let device = a.device.load(&mut cfg)?;
    let plan_path = a.plan.as_ref().ok_or_else(|| Failure::usage("--plan is required"))?;
    let mut plan = read_json::<PlanFile>(plan_path)?.to_plan();
    cfg.inputs.push(plan_path.clone());
    if let Some(m) = a.model {
        plan.model = m.into();
        cfg.set("model", plan.model.name());
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(n) = a.noise {
        plan.noise_fraction = n;
        cfg.set("noise", n);
    }
    cfg.seed = Some(plan.seed);
    match run_sweep_with_budget(&plan, &device, a.max_cells)? {
        SweepOutput::Map(map) => {
            write_sweep(&a.out, &map)?;
            println!("wrote {} ({} fields x {} frequencies)", a.out.display(), map.n_fields(), map.n_freqs());
        }
        SweepOutput::Spectra(spectra) => {
            let f = File::create(&a.out).map_err(|e| Failure::usage(format!("cannot write {}: {e}", a.out.display())))?;
            write_eigenspectra(BufWriter::new(f), &spectra)?;
            println!("wrote {} ({} fields, {} modes each)", a.out.display(), spectra.len(), spectra.first().map_or(0, |s| s.eigenvalues.len()));
        }
    }
    cfg.write_manifest(Some(&a.out), a.manifest.as_deref())?;
    Ok(())
}
