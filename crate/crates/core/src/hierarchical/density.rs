//! The one-step density of the `W` chain under block A, the Student `t₂`
//! law behind it, and integrals against it.

use std::f64::consts::SQRT_2;

use crate::error::Result;

use super::quad::{integrate_panels, QUAD_TOL};

/// Half-width of the quadrature window, in units of the kernel scale.
pub const WINDOW: f64 = 50.0;

/// `τ_w = √((1 + (y − w)²) / 2)`.
pub fn tau(w: f64, y: f64) -> f64 {
    ((1.0 + (y - w).powi(2)) / 2.0).sqrt()
}

pub fn t2_pdf(t: f64) -> f64 {
    (1.0 + t * t / 2.0).powf(-1.5) / (2.0 * SQRT_2)
}

pub fn t2_cdf(t: f64) -> f64 {
    0.5 + t / (2.0 * (2.0 + t * t).sqrt())
}

/// `k(w, w′)` as `τ_w² / (1 + (y−w)² + (y−w′)²)^{3/2}`.
pub fn k_form_ratio(w: f64, wp: f64, y: f64) -> f64 {
    let t = tau(w, y);
    t * t / (1.0 + (y - w).powi(2) + (y - wp).powi(2)).powf(1.5)
}

/// `k(w, w′)` as `(1/(√8 τ_w)) [1 + (y−w′)²/(2τ_w²)]^{−3/2}`.
pub fn k_form_t2(w: f64, wp: f64, y: f64) -> f64 {
    let t = tau(w, y);
    (1.0 + (y - wp).powi(2) / (2.0 * t * t)).powf(-1.5) / (8f64.sqrt() * t)
}

/// Density of `W_{n+1}` given `W_n = w`: location-scale `t₂` with location
/// `y` and scale `τ_w`.
pub fn marginal_density_k(w: f64, wp: f64, y: f64) -> f64 {
    k_form_t2(w, wp, y)
}

pub fn k_cdf(w: f64, wp: f64, y: f64) -> f64 {
    t2_cdf((wp - y) / tau(w, y))
}

/// The minorizing density: `t₂` with location `y`, scale `√(1/2)`.
pub fn minorizing_density(wp: f64, y: f64) -> f64 {
    let delta = 0.5f64.sqrt();
    t2_pdf((wp - y) / delta) / delta
}

/// `∫_T^∞ tᵃ f(t) dt` for the `t₂` density `f`, `a < 2`, `T ≥ 4`, summed
/// from the expansion of `(1 + t²/2)^{−3/2}` in powers of `2/t²`.
pub fn t2_tail_moment(a: f64, big_t: f64) -> f64 {
    assert!(a < 2.0 && big_t >= 4.0, "tail expansion needs a < 2, T ≥ 4");
    let mut c = 1.0;
    let mut sum = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        let term = c * 2f64.powi(k) * big_t.powf(a - 2.0 - 2.0 * kf) / (2.0 + 2.0 * kf - a);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        c *= (-1.5 - kf) / (kf + 1.0);
    }
    sum
}

/// `E|t₂|ᵃ` for `0 ≤ a < 2`.
pub fn t2_abs_moment(a: f64) -> Result<f64> {
    let body = integrate_panels(|t: f64| t.powf(a) * t2_pdf(t), &[0.0, 1.0, WINDOW], QUAD_TOL)?;
    Ok(2.0 * (body + t2_tail_moment(a, WINDOW)))
}

/// `λ = E√|t₂|`.
pub fn lambda() -> Result<f64> {
    t2_abs_moment(0.5)
}

/// `∫ |w′ − y|ᵃ k(w, w′) dw′`, integrating directly in `w′` over
/// `[y − 50τ_w, y + 50τ_w]` (split at `y`) and adding the exact tails.
pub fn k_abs_moment(w: f64, y: f64, a: f64) -> Result<f64> {
    let t = tau(w, y);
    let h = WINDOW * t;
    let f = |wp: f64| (wp - y).abs().powf(a) * marginal_density_k(w, wp, y);
    let body = integrate_panels(f, &[y - h, y - t, y, y + t, y + h], QUAD_TOL)?;
    Ok(body + 2.0 * t.powf(a) * t2_tail_moment(a, WINDOW))
}

/// `∫ k(w, w′) dw′`.
pub fn k_mass(w: f64, y: f64) -> Result<f64> {
    k_abs_moment(w, y, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_at_center() {
        for y in [-3.0, 0.0, 7.0] {
            assert!((tau(y, y) - 0.5f64.sqrt()).abs() < 1e-15);
            assert!((marginal_density_k(y, y, y) - 0.5).abs() < 1e-15);
            assert!((k_form_ratio(y, y, y) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn t2_cdf_matches_integrated_pdf() {
        for t in [-7.0, -1.0, 0.0, 0.3, 2.0, 40.0] {
            let q = super::super::quad::integrate(t2_pdf, -200.0, t, 1e-12).unwrap()
                + t2_tail_moment(0.0, 200.0);
            assert!((q - t2_cdf(t)).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn tail_series_against_quadrature() {
        for a in [0.0, 0.5, 1.0] {
            let direct = super::super::quad::integrate(|t: f64| t.powf(a) * t2_pdf(t), 10.0, 1e4, 1e-13).unwrap();
            let series = t2_tail_moment(a, 10.0) - t2_tail_moment(a, 1e4);
            assert!((direct - series).abs() < 1e-11, "a = {a}");
        }
        // a = 0 has the closed form 1 − F(T)
        assert!((t2_tail_moment(0.0, 50.0) - (1.0 - t2_cdf(50.0))).abs() < 1e-15);
    }

    #[test]
    fn minorizing_density_is_t2() {
        // (1/2)(1 + s²)^{−3/2}
        for s in [0.0f64, 1.0, -4.0] {
            let expect = 0.5 * (1.0 + s * s).powf(-1.5);
            assert!((minorizing_density(2.0 + s, 2.0) - expect).abs() < 1e-15);
        }
    }
}
