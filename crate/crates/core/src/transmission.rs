//! Feedline transmission of a notch-coupled resonator, bare and hybridized
//! with the uniform magnon mode, plus background assembly.
//!
//! The bare model is written in quality factors and the hybrid model in
//! rates; `kappa = omega_res / Q_l` and `kappa_ext = omega_res / |Q_c|`
//! connect the two. The two forms use opposite time conventions, so at
//! `g = 0` with a real background the hybrid value is the complex conjugate
//! of the bare one and their magnitudes coincide.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::kittel_frequency;
use crate::error::{Error, Result};
use crate::params::{MagnonParams, ResonatorParams};
use crate::sweep_map::SweepMap;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Single resonance in quality-factor form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BareResonanceModel {
    pub omega_res: f64,
    pub q_loaded: f64,
    pub q_coupling_abs: f64,
    pub phi: f64,
    pub attenuation_a: f64,
}

impl BareResonanceModel {
    /// Bare resonator of `resonator` at field `b0`.
    pub fn from_resonator(resonator: &ResonatorParams, b0: f64) -> Self {
        let omega = resonator.omega_r(b0);
        Self {
            omega_res: omega,
            q_loaded: omega / resonator.kappa_r(b0),
            q_coupling_abs: omega / resonator.kappa_ext,
            phi: resonator.phi,
            attenuation_a: resonator.attenuation_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_loaded > 0.0 && self.q_coupling_abs > 0.0) {
            return Err(Error::domain("quality factors must be positive"));
        }
        // Non-negative internal loss: 1/Q_i = 1/Q_l - Re(e^{i phi} / |Q_c|) >= 0.
        let internal = 1.0 / self.q_loaded - self.phi.cos() / self.q_coupling_abs;
        if internal < -1e-9 / self.q_loaded {
            return Err(Error::domain(format!(
                "negative internal loss: 1/Q_i = {internal:e}"
            )));
        }
        Ok(())
    }

    /// Total damping `omega_res / Q_l`.
    pub fn kappa_loaded(&self) -> f64 {
        self.omega_res / self.q_loaded
    }

    pub fn kappa_ext(&self) -> f64 {
        self.omega_res / self.q_coupling_abs
    }

    /// Fractional depth `Q_l / |Q_c|` of the resonance.
    pub fn coupling_ratio(&self) -> f64 {
        self.q_loaded / self.q_coupling_abs
    }
}

/// `a (1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2i Q_l (omega/omega_res - 1)))`.
pub fn s21_bare(omega: f64, model: &BareResonanceModel) -> Complex64 {
    let x = omega / model.omega_res - 1.0;
    let num = Complex64::from_polar(model.coupling_ratio(), model.phi);
    let den = Complex64::new(1.0, 2.0 * model.q_loaded * x);
    model.attenuation_a * (1.0 - num / den)
}

/// Resonator and uniform magnon evaluated at one field, ready for frequency scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridLine {
    pub omega_r: f64,
    pub kappa_r: f64,
    pub omega_m: f64,
    pub kappa_m: f64,
    pub kappa_ext: f64,
    pub phi: f64,
    pub g: f64,
}

impl HybridLine {
    pub fn at_field(b0: f64, resonator: &ResonatorParams, magnon: &MagnonParams, g: f64) -> Result<Self> {
        let line = Self {
            omega_r: resonator.omega_r(b0),
            kappa_r: resonator.kappa_r(b0),
            omega_m: kittel_frequency(b0, magnon)?,
            kappa_m: magnon.kappa_m,
            kappa_ext: resonator.kappa_ext,
            phi: resonator.phi,
            g,
        };
        if !(line.kappa_ext >= 0.0 && line.kappa_r >= 0.0 && line.kappa_m >= 0.0) {
            return Err(Error::domain("damping rates must be non-negative"));
        }
        if !(g >= 0.0) {
            return Err(Error::domain("coupling must be non-negative"));
        }
        Ok(line)
    }

    /// Resonant factor multiplying the background.
    pub fn response(&self, omega: f64) -> Complex64 {
        let magnon_den = Complex64::new(-0.5 * self.kappa_m, omega - self.omega_m);
        // kappa_m = 0 exactly on the magnon line: infinite self-energy, resonator fully detuned.
        let self_energy = if magnon_den.norm_sqr() == 0.0 {
            if self.g == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                return Complex64::new(1.0, 0.0);
            }
        } else {
            self.g * self.g / magnon_den
        };
        let den = I * (omega - self.omega_r) - 0.5 * self.kappa_r + self_energy;
        if den.norm_sqr() == 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        1.0 + 0.5 * self.kappa_ext * Complex64::from_polar(1.0, -self.phi) / den
    }
}

/// Hybrid transmission `S21,0(omega) * response`.
pub fn s21_coupled(
    omega: f64,
    b0: f64,
    resonator: &ResonatorParams,
    magnon: &MagnonParams,
    g: f64,
    s21_background: Complex64,
) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::domain("probe frequency must be positive"));
    }
    let line = HybridLine::at_field(b0, resonator, magnon, g)?;
    Ok(s21_background * line.response(omega))
}

/// One stitching segment: frequencies in `[omega_lo, omega_hi]` take the row at `b_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSegment {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub b_ref: f64,
}

/// Field-matching tolerance used when locating reference rows, T.
pub const FIELD_MATCH_TOL: f64 = 1e-9;

/// Assembles a per-frequency background from rows of `sweep` far from both branches.
pub fn stitch_background(sweep: &SweepMap, segments: &[BackgroundSegment]) -> Result<Vec<Complex64>> {
    if segments.is_empty() {
        return Err(Error::invalid("no background segments given"));
    }
    let mut sorted: Vec<BackgroundSegment> = segments.to_vec();
    sorted.sort_by(|a, b| a.omega_lo.total_cmp(&b.omega_lo));
    for s in &sorted {
        if !(s.omega_hi > s.omega_lo) {
            return Err(Error::invalid("background segment has an empty frequency range"));
        }
    }
    for w in sorted.windows(2) {
        if w[1].omega_lo < w[0].omega_hi {
            return Err(Error::invalid(format!(
                "background segments overlap between {:.6e} and {:.6e} rad/s",
                w[1].omega_lo, w[0].omega_hi
            )));
        }
    }
    let rows: Vec<usize> = sorted
        .iter()
        .map(|s| {
            sweep.field_index(s.b_ref, FIELD_MATCH_TOL).ok_or_else(|| {
                Error::invalid(format!("reference field {} T is not in the sweep", s.b_ref))
            })
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(sweep.n_freqs());
    let mut gap: Option<(f64, f64)> = None;
    for j in 0..sweep.n_freqs() {
        let w = sweep.omega(j);
        // Relative slack absorbs Hz <-> rad/s rounding at segment edges.
        let slack = 1e-12 * w;
        let hit = sorted
            .iter()
            .position(|s| w >= s.omega_lo - slack && w <= s.omega_hi + slack);
        match hit {
            Some(k) => {
                if let Some((lo, hi)) = gap {
                    return Err(Error::CoverageGap { lo_hz: lo, hi_hz: hi });
                }
                out.push(sweep.s21(rows[k], j));
            }
            None => {
                let f = sweep.freqs_hz()[j];
                gap = Some(match gap {
                    Some((lo, _)) => (lo, f),
                    None => (f, f),
                });
            }
        }
    }
    if let Some((lo, hi)) = gap {
        return Err(Error::CoverageGap { lo_hz: lo, hi_hz: hi });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep_map::{SweepData, SweepMeta};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    const MHZ: f64 = TAU * 1e6;
    const GHZ: f64 = TAU * 1e9;

    fn measured_line(phi: f64) -> BareResonanceModel {
        BareResonanceModel {
            omega_res: 3.604 * GHZ,
            q_loaded: 4302.0,
            q_coupling_abs: 11200.0,
            phi,
            attenuation_a: 1.0,
        }
    }

    fn device36() -> (ResonatorParams, MagnonParams) {
        let r = ResonatorParams {
            omega_r0: 3.5737 * GHZ,
            gamma_r: -0.05 * GHZ,
            kappa_r0: 0.8377 * MHZ,
            kappa_r_slope: 2.854 * MHZ,
            b_ref: 0.0809,
            kappa_ext: 0.3186 * MHZ,
            phi: 0.0,
            attenuation_a: 1.0,
            z_r: 17.0,
            wire_width: 10e-6,
        };
        let m = MagnonParams {
            gamma: 28.0 * GHZ,
            mu0_meff: 0.053614,
            lambda_ex_sq: 0.0,
            thickness: 300e-9,
            kappa_m: 30.62 * MHZ,
            ms_field: 0.01,
            volume: 1.08e-15,
            n_spins: 2.195e12,
        };
        (r, m)
    }

    #[test]
    fn bare_on_resonance_depth() {
        let m = measured_line(0.0);
        let s = s21_bare(m.omega_res, &m);
        assert!((s.norm() - (1.0 - 4302.0 / 11200.0)).abs() < 1e-12);
        assert!((s.norm() - 0.6159).abs() < 1e-4);
    }

    #[test]
    fn bare_far_detuned_approaches_a() {
        let mut m = measured_line(0.3);
        m.attenuation_a = 0.42;
        let s = s21_bare(m.omega_res * 1.5, &m);
        assert!((s.norm() - 0.42).abs() < 1e-3 * 0.42);
    }

    #[test]
    fn bare_symmetric_only_without_phase() {
        let m = measured_line(0.0);
        let d = 0.3 * m.kappa_loaded();
        let lo = s21_bare(m.omega_res - d, &m).norm();
        let hi = s21_bare(m.omega_res + d, &m).norm();
        assert!((lo - hi).abs() < 1e-12);
        let m = measured_line(0.4);
        let lo = s21_bare(m.omega_res - d, &m).norm();
        let hi = s21_bare(m.omega_res + d, &m).norm();
        assert!((lo - hi).abs() > 1e-3);
    }

    #[test]
    fn invisible_when_coupling_q_diverges() {
        let mut m = measured_line(0.0);
        m.q_coupling_abs = 1e12;
        assert!((1.0 - s21_bare(m.omega_res, &m).norm()) < 1e-8);
    }

    #[test]
    fn internal_loss_check() {
        let mut m = measured_line(0.0);
        assert!(m.validate().is_ok());
        m.q_coupling_abs = 4000.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn coupled_reduces_to_bare_when_g_is_zero() {
        let (mut r, m) = device36();
        r.phi = 0.25;
        r.attenuation_a = 0.7;
        let b = 0.09;
        let bare = BareResonanceModel::from_resonator(&r, b);
        let w0 = r.omega_r(b);
        for k in -400..=400 {
            let w = w0 + k as f64 * 0.02 * MHZ;
            let c = s21_coupled(w, b, &r, &m, 0.0, Complex64::new(0.7, 0.0)).unwrap();
            let e = s21_bare(w, &bare);
            assert!((c.norm() - e.norm()).abs() <= 1e-6 * e.norm());
            assert!((c - e.conj()).norm() <= 1e-6 * e.norm());
        }
    }

    /// Dense-grid local minima of |S21| at the resonance field.
    #[test]
    fn two_dips_at_crossing() {
        let (r, mut m) = device36();
        let g = 90.31 * MHZ;
        // field where the Kittel line meets the resonator
        let mut lo = 0.09;
        let mut hi = 0.12;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if kittel_frequency(mid, &m).unwrap() < r.omega_r(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        m.lambda_ex_sq = 0.0;
        let w0 = r.omega_r(b);
        let step = 1.0 * MHZ;
        let grid: Vec<f64> = (-400..=400).map(|k| w0 + k as f64 * step).collect();
        let mag: Vec<f64> = grid
            .iter()
            .map(|&w| s21_coupled(w, b, &r, &m, g, Complex64::new(1.0, 0.0)).unwrap().norm())
            .collect();
        let minima: Vec<f64> = (1..grid.len() - 1)
            .filter(|&i| mag[i] < mag[i - 1] && mag[i] < mag[i + 1])
            .map(|i| grid[i])
            .collect();
        assert_eq!(minima.len(), 2, "{minima:?}");
        let (p, q) = crate::dynamics::coupled_branch_frequencies(w0, kittel_frequency(b, &m).unwrap(), g);
        assert!((minima[1] - p).abs() <= 0.5 * step);
        assert!((minima[0] - q).abs() <= 0.5 * step);
        let split = minima[1] - minima[0];
        assert!((split - 2.0 * g).abs() < 0.01 * 2.0 * g);
    }

    #[test]
    fn far_detuned_dip_tracks_resonator() {
        let (r, m) = device36();
        let b = 0.0809;
        let w0 = r.omega_r(b);
        let step = 0.01 * MHZ;
        let best = (-3000..=3000)
            .map(|k| w0 + k as f64 * step)
            .min_by(|a, c| {
                let fa = s21_coupled(*a, b, &r, &m, 90.31 * MHZ, Complex64::new(1.0, 0.0)).unwrap().norm();
                let fc = s21_coupled(*c, b, &r, &m, 90.31 * MHZ, Complex64::new(1.0, 0.0)).unwrap().norm();
                fa.total_cmp(&fc)
            })
            .unwrap();
        // level repulsion from a magnon 650 MHz away pushes the line up by ~12 MHz
        let (p, _) = crate::dynamics::coupled_branch_frequencies(w0, kittel_frequency(b, &m).unwrap(), 90.31 * MHZ);
        assert!((best - p).abs() < r.kappa_r(b));
    }

    proptest! {
        #[test]
        fn no_unbounded_gain(
            dw in -300.0..300.0f64, b in 0.08..0.13f64, g_mhz in 0.0..150.0f64, phi in -1.0..1.0f64,
        ) {
            let (mut r, m) = device36();
            r.phi = phi;
            let bg = Complex64::new(0.3, -0.2);
            let w = r.omega_r(b) + dw * MHZ;
            let s = s21_coupled(w, b, &r, &m, g_mhz * MHZ, bg).unwrap();
            prop_assert!(s.norm() <= bg.norm() * (1.0 + r.kappa_ext / r.kappa_r(b)) * (1.0 + 1e-12));
        }
    }

    fn sweep_with_rows(fields: Vec<f64>, freqs: Vec<f64>) -> SweepMap {
        let nf = freqs.len();
        let data = (0..fields.len() * nf)
            .map(|k| Complex64::new((k / nf) as f64 + 1.0, (k % nf) as f64))
            .collect();
        SweepMap::new(fields, freqs, SweepData::Complex(data), SweepMeta::default()).unwrap()
    }

    #[test]
    fn single_segment_is_row() {
        let s = sweep_with_rows(vec![0.1, 0.2, 0.3], vec![1e9, 2e9, 3e9]);
        let seg = BackgroundSegment { omega_lo: TAU * 1e9, omega_hi: TAU * 3e9, b_ref: 0.2 };
        assert_eq!(stitch_background(&s, &[seg]).unwrap(), s.row(1));
        let split = [
            BackgroundSegment { omega_lo: TAU * 1e9, omega_hi: TAU * 2e9, b_ref: 0.2 },
            BackgroundSegment { omega_lo: TAU * 2e9, omega_hi: TAU * 3e9, b_ref: 0.2 },
        ];
        assert_eq!(stitch_background(&s, &split).unwrap(), s.row(1));
    }

    #[test]
    fn two_segment_split() {
        let freqs: Vec<f64> = (0..=230).map(|k| 3.48e9 + k as f64 * 1e6).collect();
        let s = sweep_with_rows(vec![0.1017, 0.1024, 0.1064], freqs.clone());
        let segs = [
            BackgroundSegment { omega_lo: TAU * 3.48e9, omega_hi: TAU * 3.595e9, b_ref: 0.1024 },
            BackgroundSegment { omega_lo: TAU * 3.595e9, omega_hi: TAU * 3.71e9, b_ref: 0.1064 },
        ];
        let bg = stitch_background(&s, &segs).unwrap();
        for (j, f) in freqs.iter().enumerate() {
            let expected_row = if *f <= 3.595e9 { 1 } else { 2 };
            assert_eq!(bg[j], s.s21(expected_row, j));
        }
    }

    #[test]
    fn gap_is_reported() {
        let s = sweep_with_rows(vec![0.1], vec![1e9, 2e9, 3e9, 4e9]);
        let segs = [
            BackgroundSegment { omega_lo: TAU * 1e9, omega_hi: TAU * 1.5e9, b_ref: 0.1 },
            BackgroundSegment { omega_lo: TAU * 3.5e9, omega_hi: TAU * 4e9, b_ref: 0.1 },
        ];
        match stitch_background(&s, &segs) {
            Err(Error::CoverageGap { lo_hz, hi_hz }) => {
                assert_eq!(lo_hz, 2e9);
                assert_eq!(hi_hz, 3e9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_reference_row_and_overlap() {
        let s = sweep_with_rows(vec![0.1], vec![1e9, 2e9]);
        let bad = BackgroundSegment { omega_lo: TAU * 1e9, omega_hi: TAU * 2e9, b_ref: 0.2 };
        assert!(stitch_background(&s, &[bad]).is_err());
        let a = BackgroundSegment { omega_lo: TAU * 1e9, omega_hi: TAU * 1.8e9, b_ref: 0.1 };
        let b = BackgroundSegment { omega_lo: TAU * 1.5e9, omega_hi: TAU * 2e9, b_ref: 0.1 };
        assert!(stitch_background(&s, &[a, b]).is_err());
    }
}
