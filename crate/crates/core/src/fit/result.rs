use serde::{Deserialize, Serialize};

use crate::lsq::LmReport;

/// Named parameter estimates with one-sigma errors from the fit covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl FitResult {
    pub(crate) fn from_report(names: &[&str], report: &LmReport, seed: u64) -> Self {
        let n = names.len();
        let (covariance, mut diagnostics) = match report.covariance() {
            Some(c) => ((0..n).map(|i| (0..n).map(|j| c[(i, j)]).collect()).collect(), Vec::new()),
            None => (
                vec![vec![f64::NAN; n]; n],
                vec!["covariance singular: parameters not independently determined".to_string()],
            ),
        };
        let std_errors = (0..n)
            .map(|i| {
                let v: f64 = covariance[i][i];
                if v.is_finite() && v >= 0.0 {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect();
        if !report.converged {
            diagnostics.push(format!("not converged: {}", report.message));
        }
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: report.params.clone(),
            std_errors,
            covariance,
            residual_rms: report.rms(),
            n_points: report.residuals.len(),
            iterations: report.iterations,
            converged: report.converged,
            seed,
            diagnostics,
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }
}
