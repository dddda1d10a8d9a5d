//! Damping-rate bookkeeping: resonator interpolation, magnon linewidth from
//! the branch sum rule, and admixture correction of detuned branch widths.

use super::branches::Branch;
use crate::dynamics::branch_linewidths;
use crate::error::{Error, Result};

/// Piecewise-linear `kappa_r(B)` through `(field, kappa)` anchors, extended
/// linearly beyond the outermost anchors. A single anchor gives a constant.
pub fn interpolate_kappa_r(anchors: &[(f64, f64)], b: f64) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::invalid("kappa_r interpolation needs at least one anchor"));
    }
    if anchors.iter().any(|(f, k)| !f.is_finite() || !k.is_finite()) {
        return Err(Error::invalid("kappa_r anchors must be finite"));
    }
    let mut a = anchors.to_vec();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    if let Some(w) = a.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(format!("duplicate kappa_r anchor field {} T", w[0].0)));
    }
    if a.len() == 1 {
        return Ok(a[0].1);
    }
    let k = match a.iter().position(|p| p.0 > b) {
        Some(0) => 0,
        Some(k) => k - 1,
        None => a.len() - 2,
    };
    let (b0, k0) = a[k];
    let (b1, k1) = a[k + 1];
    Ok(k0 + (k1 - k0) * (b - b0) / (b1 - b0))
}

/// `kappa_m = kappa_plus + kappa_minus - kappa_r`; negative results are rejected as unphysical.
pub fn kappa_m_from_branches(kappa_plus: f64, kappa_minus: f64, kappa_r: f64) -> Result<f64> {
    let km = kappa_plus + kappa_minus - kappa_r;
    if !km.is_finite() {
        return Err(Error::invalid("non-finite linewidth"));
    }
    if km < 0.0 {
        return Err(Error::domain(format!(
            "unphysical magnon linewidth {km:e}: kappa_plus = {kappa_plus:e}, kappa_minus = {kappa_minus:e}, kappa_r = {kappa_r:e}"
        )));
    }
    Ok(km)
}

/// Bare resonator damping that reproduces a measured branch linewidth, given
/// the magnon line and coupling. Removes the magnon admixture from a
/// resonator-like branch observed away from the crossing.
pub fn resonator_kappa_from_branch(
    kappa_branch: f64,
    branch: Branch,
    omega_r: f64,
    omega_m: f64,
    kappa_m: f64,
    g: f64,
) -> Result<f64> {
    let width = |kr: f64| -> Result<f64> {
        let (kp, km) = branch_linewidths(omega_r, kr, omega_m, kappa_m, g)?;
        Ok(match branch {
            Branch::Upper => kp,
            Branch::Lower => km,
        })
    };
    let floor = width(0.0)?;
    if kappa_branch < floor {
        return Err(Error::domain(format!(
            "branch linewidth {kappa_branch:e} is below the magnon admixture floor {floor:e}"
        )));
    }
    let mut hi = kappa_branch.max(f64::MIN_POSITIVE);
    let mut n = 0;
    while width(hi)? < kappa_branch {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(Error::NotConverged("cannot bracket resonator damping".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if width(mid)? < kappa_branch {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
