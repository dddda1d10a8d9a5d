use cavimag::fit::{fit_resonance, ResonanceFitOptions};
use cavimag::{fit_decaying_sinusoid, fit_exponential_decay};
use cavimag_bench::{bare_trace, ringdown_trace};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn resonance(c: &mut Criterion) {
    let trace = bare_trace();
    let opts = ResonanceFitOptions::default();
    c.bench_function("fit_resonance_801_points", |b| b.iter(|| fit_resonance(black_box(&trace), &opts).unwrap()));
}

fn decays(c: &mut Criterion) {
    let trace = ringdown_trace(0.101, 20_000);
    let t_start = trace.drive_on_until + 200.0 * trace.dt();
    c.bench_function("fit_exponential_decay", |b| b.iter(|| fit_exponential_decay(black_box(&trace), t_start).unwrap()));
    c.bench_function("fit_decaying_sinusoid", |b| b.iter(|| fit_decaying_sinusoid(black_box(&trace), t_start).unwrap()));
}

criterion_group!(benches, resonance, decays);
criterion_main!(benches);
