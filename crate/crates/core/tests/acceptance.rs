//! Exit criteria. Each test prints one verdict line and then asserts it.

mod common;

use std::time::Instant;

use cavimag::dynamics::{
    branch_linewidths, build_hamiltonian, complex_branch_frequencies, coupled_branch_frequencies, eigenspectrum,
    kittel_frequency, write_eigenspectra,
};
use cavimag::fit::{
    cone_angle, cooperativity, estimate_collective_coupling, estimate_single_spin_coupling, fit_field_calibration,
    kappa_m_from_branches, photon_number,
};
use cavimag::pipeline::{analyze_sweep, NominalModel, PipelineOptions};
use cavimag::ringdown::{
    decay_rate_conversion, fit_decaying_sinusoid, fit_exponential_decay, max_stable_dt, simulate_ringdown,
    RingdownDrive,
};
use cavimag::sweep::{device_preset, synthesize_acceptance_dataset, synthesize_calibration_points};
use cavimag::units::{angular_to_hz, angular_to_mhz, dbm_to_watts, ghz_to_angular, mhz_to_angular};
use cavimag::{CouplingModel, CouplingRule, MagnonParams, PhysicalConstants, ResonatorParams};
use common::{jacobi_eigen, verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

#[test]
fn criterion_01_cooperativity() {
    let c = cooperativity(mhz_to_angular(90.31), mhz_to_angular(0.902), mhz_to_angular(30.62)).unwrap();
    let pass = verdict("1", within(c, 1181.0, 2.0), &format!("C = {c:.2} (target 1181 +/- 2)"));
    assert!(pass);
}

#[test]
fn criterion_02_second_device_cooperativity() {
    let c = cooperativity(mhz_to_angular(147.21), mhz_to_angular(7.917), mhz_to_angular(117.7)).unwrap();
    let pass = verdict("2", within(c, 93.0, 1.0), &format!("C = {c:.3} (target 93.0 +/- 1)"));
    assert!(pass);
}

fn two_mode_device(omega_r: f64, omega_m: f64, field: f64) -> (ResonatorParams, MagnonParams) {
    let resonator = ResonatorParams {
        omega_r0: omega_r,
        gamma_r: 0.0,
        kappa_r0: mhz_to_angular(1.0),
        kappa_r_slope: 0.0,
        b_ref: 0.0,
        kappa_ext: mhz_to_angular(0.5),
        phi: 0.0,
        attenuation_a: 1.0,
        z_r: 50.0,
        wire_width: 10e-6,
    };
    // Zero effective magnetization makes the magnon line gamma * B.
    let magnon = MagnonParams {
        gamma: omega_m / field,
        mu0_meff: 0.0,
        lambda_ex_sq: 0.0,
        thickness: 300e-9,
        kappa_m: mhz_to_angular(1.0),
        ms_field: 0.0,
        volume: 1e-18,
        n_spins: 1e12,
    };
    (resonator, magnon)
}

#[test]
fn criterion_03_splitting_law() {
    let g = mhz_to_angular(90.31);
    let wr = ghz_to_angular(3.6);
    let (up, lo) = coupled_branch_frequencies(wr, wr, g);
    let at_zero = rel(up - lo, 2.0 * g);

    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let wr = ghz_to_angular(rng.random_range(1.0..10.0));
        let wm = ghz_to_angular(rng.random_range(1.0..10.0));
        let g = mhz_to_angular(rng.random_range(0.0..500.0));
        let field = 0.1;
        let (res, mag) = two_mode_device(wr, wm, field);
        let h = build_hamiltonian(field, &res, &mag, &CouplingModel::uniform(g)).unwrap();
        let es = eigenspectrum(&h, field).unwrap();
        let (up, lo) = coupled_branch_frequencies(wr, wm, g);
        worst = worst.max(rel(lo, es.eigenvalues[0])).max(rel(up, es.eigenvalues[1]));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = verdict(
        "3",
        at_zero < 1e-12 && worst < 1e-9 && elapsed < 1.0,
        &format!("splitting/2g - 1 = {at_zero:.1e}, worst eigenvalue mismatch {worst:.1e} (< 1e-9), {elapsed:.3} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_linewidth_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let wr = ghz_to_angular(rng.random_range(1.0..10.0));
        let wm = wr + mhz_to_angular(rng.random_range(-500.0..500.0));
        let kr = mhz_to_angular(rng.random_range(0.0..50.0));
        let km = mhz_to_angular(rng.random_range(0.0..150.0));
        let g = mhz_to_angular(rng.random_range(0.0..300.0));
        let (kp, kl) = branch_linewidths(wr, kr, wm, km, g).unwrap();
        worst = worst.max(rel(kp + kl, kr + km));
    }
    let (kr, km) = (mhz_to_angular(0.902), mhz_to_angular(30.62));
    let w = ghz_to_angular(3.6);
    let (kp, kl) = branch_linewidths(w, kr, w, km, mhz_to_angular(90.31)).unwrap();
    let mean = 0.5 * (kr + km);
    let resonant = rel(kp, mean).max(rel(kl, mean));
    let inverted = angular_to_mhz(
        kappa_m_from_branches(mhz_to_angular(15.15), mhz_to_angular(16.37), mhz_to_angular(0.902)).unwrap(),
    );
    let pass = verdict(
        "4",
        worst < 1e-9 && resonant < 1e-9 && format!("{inverted:.2}") == "30.62",
        &format!(
            "sum rule worst {worst:.1e}; resonant kappa_+/- = {:.3}/{:.3} MHz vs {:.3}; inverted kappa_m = {inverted:.3} MHz",
            angular_to_mhz(kp),
            angular_to_mhz(kl),
            angular_to_mhz(mean)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_estimators() {
    let consts = PhysicalConstants::default();
    let gs = estimate_single_spin_coupling(ghz_to_angular(3.6), 17.0, 10e-6, &consts).unwrap();
    let gs_hz = angular_to_hz(gs);
    let g_mhz = angular_to_mhz(estimate_collective_coupling(gs, 2.195e12).unwrap());
    let p = dbm_to_watts(-75.0);
    let n1 = photon_number(p, 4302.0, 11200.0, ghz_to_angular(3.604), &consts).unwrap();
    let n2 = photon_number(p, 242.1, 23000.0, ghz_to_angular(3.669), &consts).unwrap();
    let theta = cone_angle(2900.0, 2.195e12).unwrap();
    let pass = within(gs_hz, 36.0, 5.0)
        && within(g_mhz, 54.0, 8.0)
        && rel(n1, 3.9e6) <= 0.10
        && rel(n2, 5800.0) <= 0.10
        && rel(theta, 7.2e-5) <= 0.02;
    let pass = verdict(
        "5",
        pass,
        &format!("g_s = {gs_hz:.2} Hz, g = {g_mhz:.2} MHz, <n> = {n1:.3e} and {n2:.0}, theta = {theta:.3e} rad"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_inverse_pipeline() {
    let t0 = Instant::now();
    let ds = synthesize_acceptance_dataset("3.6GHz", 1).unwrap();
    // Deliberately off nominal values: they only place the branch windows.
    let mut nominal = NominalModel::from_device(&ds.device, ds.truth.b_res_t);
    nominal.g *= 1.1;
    nominal.mu0_meff *= 1.02;
    nominal.kappa_m *= 1.2;
    let r = analyze_sweep(&ds.sweep, &ds.segments, &nominal, &PipelineOptions::default()).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let g = angular_to_mhz(r.g);
    let meff = r.mu0_meff * 1e3;
    let pass = within(g, 90.31, 1.0)
        && within(meff, 53.614, 0.5)
        && within(r.b_res, 0.103429, 0.5e-3)
        && rel(r.cooperativity, 1181.0) <= 0.10
        && elapsed < 60.0;
    let pass = verdict(
        "6",
        pass,
        &format!(
            "g = {g:.3} MHz, mu0Meff = {meff:.3} mT, B_res = {:.6} T, C = {:.1}, {} fields with both branches, {elapsed:.1} s",
            r.b_res, r.cooperativity, r.fields_with_both_branches
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_ringdown_consistency() {
    let t0 = Instant::now();
    let dev = device_preset("3.6GHz").unwrap();
    let (res, mag, g) = (&dev.resonator, &dev.magnon, dev.coupling.g_uniform);
    let fields = [0.081, 0.087, 0.093, 0.098, 0.101, 0.1034, 0.108, 0.114, 0.120, 0.128];
    let mut worst: f64 = 0.0;
    let mut at_101 = None;
    let mut beat = None;
    for &b in &fields {
        let wr = res.omega_r(b);
        let wm = kittel_frequency(b, mag).unwrap();
        let (up, lo) = complex_branch_frequencies(wr, res.kappa_r(b), wm, mag.kappa_m, g);
        let (kp, kl) = branch_linewidths(wr, res.kappa_r(b), wm, mag.kappa_m, g).unwrap();
        // Drive the resonator-like branch; the other branch must die out first.
        let (w, kappa, kappa_other) = if wr > wm { (up.re, kp, kl) } else { (lo.re, kl, kp) };
        let tau = 2.0 / kappa;
        let settle = 10.0 / kappa_other;
        let run = |drive_freq: f64, span: f64| {
            let dt = 0.9 * max_stable_dt(res, mag, g, b, drive_freq).unwrap();
            let t_on = (10.0 * tau / dt).round() * dt;
            let drive = RingdownDrive { drive_freq, amplitude: 1.0, t_on, t_total: t_on + settle + span, dt };
            (simulate_ringdown(res, mag, g, b, &drive).unwrap(), t_on + settle)
        };
        let (trace, t_start) = run(w, 6.0 * tau);
        let fit = fit_exponential_decay(&trace, t_start).unwrap();
        let (_, kappa_fit) = decay_rate_conversion(fit.values[1]).unwrap();
        worst = worst.max(rel(kappa_fit, kappa));
        if b == 0.101 {
            at_101 = Some((fit.values[1], kappa_fit));
            let detuned = mhz_to_angular(5.0);
            let (trace, t_start) = run(w + detuned, (6.0 * tau).max(4.0 / 5e6));
            beat = Some(fit_decaying_sinusoid(&trace, t_start).unwrap().values[2]);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let (tau_v, kappa_plus) = at_101.unwrap();
    let kappa_mhz = angular_to_mhz(kappa_plus);
    let beat_mhz = beat.unwrap() / 1e6;
    let consistent = worst <= 0.01;
    let time_constant = rel(tau_v, 170e-9) <= 0.02 && rel(kappa_mhz, 1.872) <= 0.02;
    let beating = within(beat_mhz, 5.0, 0.1);
    let pass = verdict(
        "7",
        consistent && time_constant && beating && elapsed < 30.0,
        &format!(
            "{} fields, worst ring-down/linewidth mismatch {:.2e} (<= 1e-2): {}; at 0.101 T tau_V = {:.1} ns, kappa_+ = {kappa_mhz:.3} MHz (target 170 ns, 1.872 MHz +/- 2%): {}; beat = {beat_mhz:.4} MHz (5 +/- 0.1): {}; {elapsed:.1} s",
            fields.len(),
            worst,
            if consistent { "ok" } else { "off" },
            tau_v * 1e9,
            if time_constant { "ok" } else { "off" },
            if beating { "ok" } else { "off" },
        ),
    );
    assert!(pass);
}

fn multimode_device(lambda_scale: f64) -> (ResonatorParams, MagnonParams, CouplingModel) {
    let resonator = ResonatorParams {
        omega_r0: ghz_to_angular(3.593),
        gamma_r: 0.0,
        kappa_r0: mhz_to_angular(1.0),
        kappa_r_slope: 0.0,
        b_ref: 0.098,
        kappa_ext: mhz_to_angular(0.5),
        phi: 0.0,
        attenuation_a: 1.0,
        z_r: 17.0,
        wire_width: 10e-6,
    };
    let magnon = MagnonParams {
        gamma: ghz_to_angular(28.0),
        mu0_meff: 53.7e-3,
        lambda_ex_sq: 0.25e-16 * lambda_scale,
        thickness: 300e-9,
        kappa_m: 0.0,
        ms_field: 53.7e-3,
        volume: 1e-18,
        n_spins: 2.195e12,
    };
    let coupling = CouplingModel::new(mhz_to_angular(90.0), 4, CouplingRule::InverseIndex).unwrap();
    (resonator, magnon, coupling)
}

fn as_rows(h: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect()
}

#[test]
fn criterion_08_multimode_spectrum() {
    let t0 = Instant::now();
    let (res, mag, coupling) = multimode_device(1.0);
    let g = coupling.g_uniform;
    let fields: Vec<f64> = (0..=120).map(|k| 0.098 + 1e-4 * k as f64).collect();
    let spectra: Vec<_> = fields
        .iter()
        .map(|&b| eigenspectrum(&build_hamiltonian(b, &res, &mag, &coupling).unwrap(), b).unwrap())
        .collect();

    // Exported file against the Jacobi oracle.
    let mut buf = Vec::new();
    write_eigenspectra(&mut buf, &spectra).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<[f64; 3]> = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    let mut oracle_err: f64 = 0.0;
    for (k, &b) in fields.iter().enumerate() {
        let h = build_hamiltonian(b, &res, &mag, &coupling).unwrap();
        let (vals, vecs) = jacobi_eigen(as_rows(&h));
        for i in 0..6 {
            let [fb, ghz, weight] = rows[6 * k + i];
            assert_eq!(fb, b);
            oracle_err = oracle_err
                .max(rel(ghz_to_angular(ghz), vals[i]))
                .max((weight - vecs[0][i] * vecs[0][i]).abs());
        }
    }

    // Gap at the field where the Kittel line meets the resonator.
    let b_res = {
        let target = res.omega_r0 / mag.gamma;
        0.5 * (-mag.mu0_meff + (mag.mu0_meff * mag.mu0_meff + 4.0 * target * target).sqrt())
    };
    let at_res = eigenspectrum(&build_hamiltonian(b_res, &res, &mag, &coupling).unwrap(), b_res).unwrap();
    let mut by_weight: Vec<usize> = (0..6).collect();
    by_weight.sort_by(|&a, &b| at_res.resonator_weights[b].total_cmp(&at_res.resonator_weights[a]));
    let (d0, d1) = (by_weight[0].min(by_weight[1]), by_weight[0].max(by_weight[1]));
    let dominant_split = at_res.eigenvalues[d1] - at_res.eigenvalues[d0];
    let total_gap = at_res.eigenvalues[5] - at_res.eigenvalues[0];
    let gap_ok = dominant_split >= 2.0 * g && total_gap > 2.0 * g && (d0, d1) == (0, 5);

    // Faint lines at the sweep ends.
    let faint_ok = [spectra.first().unwrap(), spectra.last().unwrap()].iter().all(|s| {
        let mut w = s.resonator_weights.clone();
        w.sort_by(|a, b| a.total_cmp(b));
        w[..4].iter().all(|&x| x < 0.5)
    });

    // Faint lines approach the Kittel line as the exchange length shrinks.
    let b_far = 0.098;
    let spread = |scale: f64| {
        let (r, m, c) = multimode_device(scale);
        let s = eigenspectrum(&build_hamiltonian(b_far, &r, &m, &c).unwrap(), b_far).unwrap();
        let wk = kittel_frequency(b_far, &m).unwrap();
        let mut idx: Vec<usize> = (0..6).collect();
        idx.sort_by(|&a, &b| s.resonator_weights[a].total_cmp(&s.resonator_weights[b]));
        idx[..4].iter().map(|&i| (s.eigenvalues[i] - wk).abs()).fold(0.0, f64::max)
    };
    let scales = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let spreads: Vec<f64> = scales.iter().map(|&s| spread(s)).collect();
    let converge_ok = spreads.windows(2).all(|w| w[1] < w[0])
        && scales.iter().zip(&spreads).all(|(s, d)| *d <= 2.0 * s * spreads[0]);

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = verdict(
        "8",
        oracle_err <= 1e-10 && gap_ok && faint_ok && converge_ok && elapsed < 5.0,
        &format!(
            "oracle mismatch {oracle_err:.1e} (<= 1e-10); dominant splitting {:.2} MHz, total gap {:.2} MHz vs 2g = {:.2} MHz; faint weights < 0.5: {faint_ok}; faint-line offset from Kittel {:.3} -> {:.2e} MHz as lambda_ex^2 -> 0; {elapsed:.2} s",
            angular_to_mhz(dominant_split),
            angular_to_mhz(total_gap),
            angular_to_mhz(2.0 * g),
            angular_to_mhz(spreads[0]),
            angular_to_mhz(*spreads.last().unwrap()),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_decay_conversion() {
    let (tau_e, kappa) = decay_rate_conversion(170.0e-9).unwrap();
    let mhz = angular_to_mhz(kappa);
    let shown = format!("{mhz:.3}");
    let pass = verdict("9", shown == "1.872", &format!("tau_E = {:.1} ns, kappa = {mhz:.5} MHz", tau_e * 1e9));
    assert!(pass);
}

#[test]
fn criterion_10_field_calibration() {
    let consts = PhysicalConstants::default();
    let slope = 60.64e-3;
    let points = synthesize_calibration_points(slope, 2.083, 0.05e-3, 10, &consts).unwrap();
    let cal = fit_field_calibration(&points, 2.083, &consts).unwrap();
    let slope_mt = cal.slope_t_per_a * 1e3;
    let intercept_mt = cal.intercept_t * 1e3;
    let pass = verdict(
        "10",
        within(slope_mt, 60.64, 0.10) && within(intercept_mt, 0.0, 0.4),
        &format!(
            "slope = {slope_mt:.4} +/- {:.4} mT/A, intercept = {intercept_mt:.4} +/- {:.4} mT over {} points",
            cal.slope_err * 1e3,
            cal.intercept_err * 1e3,
            points.len()
        ),
    );
    assert!(pass);
}
