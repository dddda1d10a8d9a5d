//! Levenberg-Marquardt least squares with a central-difference Jacobian.
//!
//! Columns of the Jacobian are scaled to unit norm before every solve, so
//! parameters of wildly different magnitude (a gigahertz frequency next to a
//! dimensionless amplitude) do not wreck the normal equations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Residual callback. Returns `None` when `params` leave the model's domain.
pub trait Residuals {
    fn eval(&self, params: &[f64]) -> Option<Vec<f64>>;
}

impl<F> Residuals for F
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    fn eval(&self, params: &[f64]) -> Option<Vec<f64>> {
        self(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost reduction below which an accepted step counts as stalled.
    pub ftol: f64,
    /// Relative step size below which the iteration stops.
    pub xtol: f64,
    /// Typical magnitude per parameter, used for difference steps when a value is zero.
    pub scales: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            ftol: 1e-15,
            xtol: 1e-13,
            scales: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    /// Half the residual sum of squares.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl LmReport {
    pub fn rms(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (2.0 * self.cost / self.residuals.len() as f64).sqrt()
    }

    /// `(J^T J)^{-1} * SSR / (m - n)`, or `None` if the problem is singular.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let m = self.residuals.len();
        let n = self.params.len();
        if m <= n {
            return Some(DMatrix::zeros(n, n));
        }
        let s2 = 2.0 * self.cost / (m - n) as f64;
        let (jtj, d) = scaled_normal_matrix(&self.jacobian);
        let inv = jtj.try_inverse()?;
        let dinv = d.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 });
        let mut cov = inv;
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] *= dinv[i] * dinv[j] * s2;
            }
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(cov)
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// `J^T J` with columns scaled to unit norm, plus the column norms.
fn scaled_normal_matrix(j: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = j.ncols();
    let d = DVector::from_iterator(n, (0..n).map(|c| j.column(c).norm()));
    let mut js = j.clone();
    for c in 0..n {
        if d[c] > 0.0 {
            js.column_mut(c).scale_mut(1.0 / d[c]);
        }
    }
    (js.transpose() * &js, d)
}

fn diff_steps(p: &[f64], scales: Option<&[f64]>) -> Vec<f64> {
    let eps = f64::EPSILON.cbrt();
    p.iter()
        .enumerate()
        .map(|(i, v)| {
            let typical = scales.and_then(|s| s.get(i).copied()).unwrap_or(0.0).abs();
            let base = v.abs().max(typical);
            eps * if base > 0.0 { base } else { 1.0 }
        })
        .collect()
}

fn jacobian<R: Residuals + ?Sized>(
    model: &R,
    p: &[f64],
    r0: &[f64],
    scales: Option<&[f64]>,
) -> Option<DMatrix<f64>> {
    let m = r0.len();
    let n = p.len();
    let steps = diff_steps(p, scales);
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for c in 0..n {
        let h = steps[c];
        q[c] = p[c] + h;
        let fwd = model.eval(&q);
        q[c] = p[c] - h;
        let bwd = model.eval(&q);
        q[c] = p[c];
        match (fwd, bwd) {
            (Some(f), Some(b)) => {
                for i in 0..m {
                    jac[(i, c)] = (f[i] - b[i]) / (2.0 * h);
                }
            }
            (Some(f), None) => {
                for i in 0..m {
                    jac[(i, c)] = (f[i] - r0[i]) / h;
                }
            }
            (None, Some(b)) => {
                for i in 0..m {
                    jac[(i, c)] = (r0[i] - b[i]) / h;
                }
            }
            (None, None) => return None,
        }
    }
    Some(jac)
}

/// Minimizes `0.5 * |r(p)|^2` from `p0`.
pub fn levenberg_marquardt<R: Residuals + ?Sized>(model: &R, p0: &[f64], opts: &LmOptions) -> Option<LmReport> {
    let n = p0.len();
    let scales = opts.scales.as_deref();
    let mut p = p0.to_vec();
    let mut r = model.eval(&p)?;
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut jac = jacobian(model, &p, &r, scales)?;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            message = "exact fit".into();
            break;
        }
        let (jtj, d) = scaled_normal_matrix(&jac);
        let rv = DVector::from_column_slice(&r);
        let mut grad = jac.transpose() * rv;
        for c in 0..n {
            grad[c] = if d[c] > 0.0 { grad[c] / d[c] } else { 0.0 };
        }
        if grad.amax() <= 1e-15 * (2.0 * cost).sqrt().max(f64::MIN_POSITIVE) {
            converged = true;
            message = "gradient vanished".into();
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for c in 0..n {
                a[(c, c)] += lambda * (1.0 + a[(c, c)]);
            }
            let y = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match a.lu().solve(&(-&grad)) {
                    Some(v) => v,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let step: Vec<f64> = (0..n)
                .map(|c| if d[c] > 0.0 { y[c] / d[c] } else { 0.0 })
                .collect();
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            let Some(rt) = model.eval(&trial) else {
                lambda *= 10.0;
                continue;
            };
            let ct = cost_of(&rt);
            if ct.is_finite() && ct < cost {
                let rel_drop = (cost - ct) / cost;
                let rel_step = p
                    .iter()
                    .zip(&step)
                    .enumerate()
                    .map(|(i, (pv, s))| {
                        let typical = scales.and_then(|sc| sc.get(i).copied()).unwrap_or(0.0).abs();
                        s.abs() / pv.abs().max(typical).max(f64::MIN_POSITIVE)
                    })
                    .fold(0.0, f64::max);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_drop < opts.ftol || rel_step < opts.xtol {
                    converged = true;
                    message = if rel_drop < opts.ftol {
                        "cost reduction below tolerance".into()
                    } else {
                        "step below tolerance".into()
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a (numerical) minimum.
            converged = true;
            message = "no further descent".into();
            break;
        }
        jac = jacobian(model, &p, &r, scales)?;
        if converged {
            break;
        }
    }

    debug_assert_eq!(r.len(), m);
    Some(LmReport {
        params: p,
        residuals: r,
        jacobian: jac,
        cost,
        iterations,
        converged,
        message,
    })
}

/// Deterministic multi-start schedule around an initial guess.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiStart {
    pub starts: usize,
    /// Relative perturbation half-width (0.2 = +/-20%).
    pub spread: f64,
    pub seed: u64,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self {
            starts: 5,
            spread: 0.2,
            seed: 0x5eed,
        }
    }
}

impl MultiStart {
    /// Start points: the guess itself, then seeded perturbations of it.
    /// Zero-valued entries are shifted additively by `spread * scale`.
    pub fn points(&self, guess: &[f64], scales: &[f64]) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![guess.to_vec()];
        for _ in 1..self.starts.max(1) {
            let p = guess
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let u: f64 = rng.random_range(-self.spread..=self.spread);
                    if *v != 0.0 {
                        v * (1.0 + u)
                    } else {
                        u * scales.get(i).copied().unwrap_or(1.0)
                    }
                })
                .collect();
            out.push(p);
        }
        out
    }
}

/// Runs LM from every start and keeps the lowest-cost result, preferring converged runs.
pub fn multi_start_fit<R: Residuals + ?Sized>(
    model: &R,
    guess: &[f64],
    schedule: &MultiStart,
    opts: &LmOptions,
) -> Option<(LmReport, usize)> {
    let scales = opts.scales.clone().unwrap_or_else(|| guess.iter().map(|v| v.abs()).collect());
    let mut best: Option<(LmReport, usize)> = None;
    for (k, start) in schedule.points(guess, &scales).into_iter().enumerate() {
        let Some(rep) = levenberg_marquardt(model, &start, opts) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((b, _)) => match (rep.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => rep.cost < b.cost,
            },
        };
        if better {
            best = Some((rep, k));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_exactly() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-t / 1.7).exp()).collect();
        let model = |p: &[f64]| -> Option<Vec<f64>> {
            Some(t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect())
        };
        let rep = levenberg_marquardt(&model, &[1.0, 1.0], &LmOptions::default()).unwrap();
        assert!(rep.converged, "{}", rep.message);
        assert!((rep.params[0] - 2.5).abs() < 1e-10);
        assert!((rep.params[1] - 1.7).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock_minimum() {
        let model = |p: &[f64]| -> Option<Vec<f64>> { Some(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]) };
        let rep = levenberg_marquardt(&model, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!((rep.params[0] - 1.0).abs() < 1e-8);
        assert!((rep.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_fit_covariance_matches_closed_form() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let noise = [0.1, -0.2, 0.05, 0.3, -0.1, 0.0, 0.2, -0.3, 0.1, -0.05,
                     0.15, -0.25, 0.05, 0.1, -0.1, 0.2, -0.2, 0.0, 0.1, -0.1];
        let y: Vec<f64> = x.iter().zip(noise).map(|(x, e)| 3.0 + 0.5 * x + e).collect();
        let model = |p: &[f64]| -> Option<Vec<f64>> {
            Some(x.iter().zip(&y).map(|(x, y)| p[0] + p[1] * x - y).collect())
        };
        let rep = levenberg_marquardt(&model, &[0.0, 0.0], &LmOptions { scales: Some(vec![1.0, 1.0]), ..Default::default() }).unwrap();
        let cov = rep.covariance().unwrap();
        // closed-form OLS
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let s2 = 2.0 * rep.cost / (n - 2.0);
        assert!((cov[(1, 1)] - s2 / sxx).abs() < 1e-9 * s2 / sxx);
        assert!((cov[(0, 0)] - s2 * (1.0 / n + mx * mx / sxx)).abs() < 1e-9);
    }

    #[test]
    fn multistart_is_deterministic() {
        let s = MultiStart::default();
        assert_eq!(s.points(&[1.0, 0.0], &[1.0, 0.5]), s.points(&[1.0, 0.0], &[1.0, 0.5]));
        let pts = s.points(&[1.0, 0.0], &[1.0, 0.5]);
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0], vec![1.0, 0.0]);
        for p in &pts[1..] {
            assert!((p[0] - 1.0).abs() <= 0.2 + 1e-15);
            assert!(p[1].abs() <= 0.1 + 1e-15);
        }
    }
}
