//! Adaptive quadrature: double-exponential rules on bisected panels.

use crate::error::{Error, Result};

/// Default absolute tolerance for finite windows.
pub const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;

/// `∫_a^b f` to absolute accuracy `tol`, bisecting panels whose error
/// estimate is too large.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let out = quadrature::double_exponential::integrate(&f, lo, hi, t);
        // estimates this far below the panel value are rounding noise
        let floor = 1e-13 * out.integral.abs();
        if out.error_estimate <= t.max(floor) && out.integral.is_finite() {
            total += out.integral;
        } else if depth < MAX_DEPTH {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * t, depth + 1));
            stack.push((lo, mid, 0.5 * t, depth + 1));
        } else {
            return Err(Error::Numerical(format!(
                "quadrature did not converge on [{lo}, {hi}] (estimate {:e})",
                out.error_estimate
            )));
        }
    }
    Ok(total)
}

/// Integral over consecutive panels `[p_0, p_1], [p_1, p_2], …`.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|p| integrate(&f, p[0], p[1], tol / n))
        .sum()
}
