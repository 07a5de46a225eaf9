//! Numerical checks of the drift and minorization conditions for the block A
//! `W` chain, with drift function `V(w) = √|y − w|`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::density::{k_abs_moment, lambda, marginal_density_k, minorizing_density, t2_abs_moment};

pub const DRIFT_SLACK_TOL: f64 = 1e-6;
pub const MINORIZATION_TOL: f64 = 1e-12;
/// Safety factor applied to the small-set radius threshold by default.
pub const RADIUS_FACTOR: f64 = 1.05;

pub fn drift_function(w: f64, y: f64) -> f64 {
    (y - w).abs().sqrt()
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// The default drift grid: 10³ points on `[y − 100, y + 100]`.
pub fn default_drift_grid(y: f64) -> Vec<f64> {
    linspace(y - 100.0, y + 100.0, 1000)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftPoint {
    pub w: f64,
    /// `∫ V(w′) k(w, w′) dw′`.
    pub lhs: f64,
    /// `(λ/2^{1/4}) (1 + V(w))`.
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub y: f64,
    pub lambda: f64,
    pub lambda_bound: f64,
    pub lambda_below_bound: bool,
    /// `E|t₂|` by quadrature, against its exact value `√2`.
    pub abs_moment: f64,
    pub abs_moment_error: f64,
    /// Drift coefficient `b = λ / 2^{1/4}`.
    pub coefficient: f64,
    pub min_slack: f64,
    pub points: Vec<DriftPoint>,
    pub holds: bool,
}

pub fn verify_drift(y: f64, w_grid: &[f64]) -> Result<DriftReport> {
    if !y.is_finite() || w_grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::Precondition("drift grid must be finite".into()));
    }
    let lam = lambda()?;
    let abs_moment = t2_abs_moment(1.0)?;
    let lambda_bound = 2f64.powf(0.25);
    let b = lam / lambda_bound;
    let points = w_grid
        .par_iter()
        .map(|&w| {
            let lhs = k_abs_moment(w, y, 0.5)?;
            let rhs = b * (1.0 + drift_function(w, y));
            Ok(DriftPoint {
                w,
                lhs,
                rhs,
                slack: rhs - lhs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_slack = points.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    let lambda_below_bound = lam < lambda_bound;
    Ok(DriftReport {
        y,
        lambda: lam,
        lambda_bound,
        lambda_below_bound,
        abs_moment,
        abs_moment_error: (abs_moment - 2f64.sqrt()).abs(),
        coefficient: b,
        min_slack,
        holds: lambda_below_bound && min_slack >= -DRIFT_SLACK_TOL,
        points,
    })
}

/// Smallest admissible small-set radius `(2^{3/4} λ) / (1 − λ / 2^{1/4})`.
pub fn radius_threshold(lam: f64) -> f64 {
    2f64.powf(0.75) * lam / (1.0 - lam / 2f64.powf(0.25))
}

pub fn default_radius() -> Result<f64> {
    Ok(RADIUS_FACTOR * radius_threshold(lambda()?))
}

/// Default minorization grids: 201 points across the small set
/// `{w : √|y − w| ≤ d}` and 10³ points for `w′` on `[y − 100, y + 100]`.
pub fn default_minorization_grids(y: f64, d: f64) -> (Vec<f64>, Vec<f64>) {
    let r = d * d;
    (linspace(y - r, y + r, 201), linspace(y - 100.0, y + 100.0, 1000))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinorizationViolation {
    pub w: f64,
    pub wp: f64,
    pub k: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinorizationReport {
    pub y: f64,
    pub d: f64,
    pub radius_threshold: f64,
    /// `ε = (1 + d²)^{−1/2}`.
    pub epsilon: f64,
    pub grid_points: usize,
    pub violations: usize,
    /// Most negative `k(w, w′) − ε g(w′)` on the grid.
    pub worst: MinorizationViolation,
    /// `min k(w, w′) / g(w′)` over the grid.
    pub empirical_epsilon: f64,
    /// `(1 + d⁴)^{−1/2}`, the exact infimum of `k(w, ·) / g` over the small set.
    pub small_set_infimum: f64,
    pub holds_with_small_set_infimum: bool,
    pub holds: bool,
}

pub fn verify_minorization(y: f64, d: f64, w_grid: &[f64], wp_grid: &[f64]) -> Result<MinorizationReport> {
    let threshold = radius_threshold(lambda()?);
    if !(d > threshold) {
        return Err(Error::Precondition(format!(
            "small-set radius d = {d} must exceed {threshold}"
        )));
    }
    if let Some(w) = w_grid.iter().find(|&&w| !(drift_function(w, y) <= d)) {
        return Err(Error::Precondition(format!(
            "grid point w = {w} lies outside the small set √|y − w| ≤ {d}"
        )));
    }
    if w_grid.is_empty() || wp_grid.is_empty() || wp_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("minorization grids must be finite and nonempty".into()));
    }
    let epsilon = 1.0 / (1.0 + d * d).sqrt();
    let small_set_infimum = 1.0 / (1.0 + d.powi(4)).sqrt();
    let g: Vec<f64> = wp_grid.iter().map(|&wp| minorizing_density(wp, y)).collect();

    struct Scan {
        violations: usize,
        valid_violations: usize,
        worst: MinorizationViolation,
        worst_slack: f64,
        ratio: f64,
    }
    let scans: Vec<Scan> = w_grid
        .par_iter()
        .map(|&w| {
            let mut s = Scan {
                violations: 0,
                valid_violations: 0,
                worst: MinorizationViolation { w, wp: wp_grid[0], k: 0.0, bound: 0.0 },
                worst_slack: f64::INFINITY,
                ratio: f64::INFINITY,
            };
            for (&wp, &gv) in wp_grid.iter().zip(&g) {
                let k = marginal_density_k(w, wp, y);
                let bound = epsilon * gv;
                let slack = k - bound;
                if slack < -MINORIZATION_TOL {
                    s.violations += 1;
                }
                if k < small_set_infimum * gv - MINORIZATION_TOL {
                    s.valid_violations += 1;
                }
                if slack < s.worst_slack {
                    s.worst_slack = slack;
                    s.worst = MinorizationViolation { w, wp, k, bound };
                }
                s.ratio = s.ratio.min(k / gv);
            }
            s
        })
        .collect();
    let worst = scans
        .iter()
        .min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .expect("nonempty grid")
        .worst;
    let violations = scans.iter().map(|s| s.violations).sum();
    Ok(MinorizationReport {
        y,
        d,
        radius_threshold: threshold,
        epsilon,
        grid_points: w_grid.len() * wp_grid.len(),
        violations,
        worst,
        empirical_epsilon: scans.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min),
        small_set_infimum,
        holds_with_small_set_infimum: scans.iter().all(|s| s.valid_violations == 0),
        holds: violations == 0,
    })
}
