//! Fixtures shared by the criterion benches.

use cavimag::fit::ResonanceTrace;
use cavimag::ringdown::max_stable_dt;
use cavimag::sweep::{device_preset, run_sweep, Background, OutputKind, SweepModel, SweepOutput, SweepPlan};
use cavimag::units::{ghz_to_angular, mhz_to_angular};
use cavimag::{simulate_ringdown, DeviceConfig, RingdownDrive, RingdownTrace};

pub fn device() -> DeviceConfig {
    device_preset("3.6GHz").expect("built-in preset")
}

/// Coupled sweep over the anticrossing, `n_fields` x `n_freqs` cells.
pub fn coupled_plan(n_fields: usize, n_freqs: usize) -> SweepPlan {
    let (b0, b1) = (0.085, 0.125);
    let (f0, f1) = (ghz_to_angular(3.45), ghz_to_angular(3.70));
    SweepPlan {
        field_start: b0,
        field_stop: b1,
        field_step: (b1 - b0) / (n_fields.max(2) - 1) as f64,
        freq_start: f0,
        freq_stop: f1,
        freq_step: (f1 - f0) / (n_freqs.max(2) - 1) as f64,
        model: SweepModel::Coupled,
        noise_fraction: 0.01,
        seed: 1,
        output: OutputKind::Complex,
        background: Background::default(),
    }
}

/// Noisy magnitude trace through the bare resonator line far from the anticrossing.
pub fn bare_trace() -> ResonanceTrace {
    let w0 = device().resonator.omega_r(0.5);
    let plan = SweepPlan {
        field_start: 0.5,
        field_stop: 0.5,
        field_step: 1e-3,
        freq_start: w0 - mhz_to_angular(8.0),
        freq_stop: w0 + mhz_to_angular(8.0),
        freq_step: mhz_to_angular(0.02),
        model: SweepModel::Coupled,
        ..coupled_plan(2, 2)
    };
    let SweepOutput::Map(map) = run_sweep(&plan, &device()).expect("valid plan") else {
        unreachable!("coupled plans produce maps")
    };
    let magnitude = (0..map.n_freqs()).map(|j| map.magnitude(0, j)).collect();
    ResonanceTrace::Magnitude { omegas: map.omegas(), magnitude }
}

/// Ring-down drive on the resonator-like branch at `b` with `samples` steps after switch-off.
pub fn ringdown_drive(b: f64, samples: usize) -> RingdownDrive {
    let d = device();
    let w = d.resonator.omega_r(b);
    let dt = 0.9 * max_stable_dt(&d.resonator, &d.magnon, d.coupling.g_uniform, b, w).expect("valid field");
    let t_on = 2000.0 * dt;
    RingdownDrive { drive_freq: w, amplitude: 1.0, t_on, t_total: t_on + samples as f64 * dt, dt }
}

pub fn ringdown_trace(b: f64, samples: usize) -> RingdownTrace {
    let d = device();
    simulate_ringdown(&d.resonator, &d.magnon, d.coupling.g_uniform, b, &ringdown_drive(b, samples)).expect("stable drive")
}
