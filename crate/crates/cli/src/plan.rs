//! Sweep plans as written by users: fields in mT, frequencies in GHz and MHz.

use cavimag::sweep::{Background, OutputKind, SweepModel, SweepPlan};
use cavimag::units::{ghz_to_angular, mhz_to_angular};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub field_start_mt: f64,
    pub field_stop_mt: f64,
    pub field_step_mt: f64,
    pub freq_start_ghz: f64,
    pub freq_stop_ghz: f64,
    pub freq_step_mhz: f64,
    pub model: SweepModel,
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputKind,
    #[serde(default)]
    pub background: BackgroundFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundFile {
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Relative slope per GHz.
    #[serde(default)]
    pub tilt_per_ghz: f64,
    #[serde(default)]
    pub delay_ns: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for BackgroundFile {
    fn default() -> Self {
        Self { amplitude: 1.0, tilt_per_ghz: 0.0, delay_ns: 0.0 }
    }
}

impl PlanFile {
    pub fn to_plan(&self) -> SweepPlan {
        SweepPlan {
            field_start: self.field_start_mt * 1e-3,
            field_stop: self.field_stop_mt * 1e-3,
            field_step: self.field_step_mt * 1e-3,
            freq_start: ghz_to_angular(self.freq_start_ghz),
            freq_stop: ghz_to_angular(self.freq_stop_ghz),
            freq_step: mhz_to_angular(self.freq_step_mhz),
            model: self.model,
            noise_fraction: self.noise_fraction,
            seed: self.seed,
            output: self.output,
            background: Background {
                amplitude: self.background.amplitude,
                tilt_per_hz: self.background.tilt_per_ghz * 1e-9,
                delay_s: self.background.delay_ns * 1e-9,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_to_si() {
        let p: PlanFile = serde_json::from_str(
            r#"{"field_start_mt": 80, "field_stop_mt": 120, "field_step_mt": 0.5,
                "freq_start_ghz": 3.4, "freq_stop_ghz": 3.8, "freq_step_mhz": 1,
                "model": "multimode-eigen", "background": {"delay_ns": 5}}"#,
        )
        .unwrap();
        let s = p.to_plan();
        assert_eq!(s.field_step, 0.5e-3);
        assert!((s.freq_step - mhz_to_angular(1.0)).abs() < 1e-9);
        assert_eq!(s.model, SweepModel::MultimodeEigen);
        assert_eq!(s.background.amplitude, 1.0);
        assert!((s.background.delay_s - 5e-9).abs() < 1e-24);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let e = serde_json::from_str::<PlanFile>(r#"{"field_start": 1}"#).unwrap_err().to_string();
        assert!(e.contains("field_start"), "{e}");
        let e = serde_json::from_str::<PlanFile>(
            r#"{"field_start_mt": 80, "field_stop_mt": 120, "field_step_mt": 0.5,
                "freq_start_ghz": 3.4, "freq_stop_ghz": 3.8, "model": "coupled"}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(e.contains("freq_step_mhz"), "{e}");
    }
}
