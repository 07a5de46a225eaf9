//! Spectra, spectral gaps and operator norms of Markov operators.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{pi_matrix, spectral_norm, symmetrize, ProjectorMatrix, ALGEBRA_TOL};

pub type Complex64 = nalgebra::Complex<f64>;

/// Tolerance for comparing eigenvalues.
pub const SPECTRAL_TOL: f64 = 1e-8;
/// An operator has a spectral gap when `1 − r(Q − Π)` exceeds this.
pub const GAP_THRESHOLD: f64 = 1e-8;

/// An eigenvalue serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue(pub f64, pub f64);

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self(z.re, z.im)
    }
}

impl Eigenvalue {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.0, self.1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Eigenvalues of `Q − Π`, sorted by (re, im).
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_radius: f64,
    pub gap: f64,
    pub pi_operator_norm: f64,
    pub is_self_adjoint: bool,
}

impl SpectralReport {
    pub fn has_gap(&self) -> bool {
        self.gap > GAP_THRESHOLD
    }

    pub fn complex_eigenvalues(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|e| e.to_complex()).collect()
    }
}

/// Eigenvalues of `M` computed in `L²(π)` coordinates, and whether `M` is
/// π-self-adjoint (in which case a symmetric solver is used).
pub fn pi_eigenvalues(m: &DMatrix<f64>, probs: &[f64]) -> Result<(Vec<Complex64>, bool)> {
    let a = symmetrize(m, probs);
    let asym = (&a - a.transpose()).abs().max();
    if asym <= ALGEBRA_TOL {
        let sym = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok((
            eig.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            true,
        ))
    } else {
        Ok((general_eigenvalues(a)?, false))
    }
}

fn general_eigenvalues(a: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let schur = Schur::try_new(a, f64::EPSILON, 1000 * n.max(1)).ok_or(Error::EigenFailure(n))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn sort_key(z: &Complex64) -> (i64, i64) {
    (
        (z.re / SPECTRAL_TOL).round() as i64,
        (z.im / SPECTRAL_TOL).round() as i64,
    )
}

pub(crate) fn sort_eigenvalues(v: &mut [Complex64]) {
    v.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
}

/// Report for `Q − Π` given the raw matrix of `Q` and its stationary law.
pub fn spectral_report_raw(q: &DMatrix<f64>, probs: &[f64]) -> Result<SpectralReport> {
    let centered = q - pi_matrix(probs);
    let (mut eigs, is_self_adjoint) = pi_eigenvalues(&centered, probs)?;
    sort_eigenvalues(&mut eigs);
    let spectral_radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SpectralReport {
        eigenvalues: eigs.into_iter().map(Eigenvalue::from).collect(),
        spectral_radius,
        gap: 1.0 - spectral_radius,
        pi_operator_norm: spectral_norm(&symmetrize(&centered, probs)),
        is_self_adjoint,
    })
}

pub fn spectral_report(q: &ProjectorMatrix) -> Result<SpectralReport> {
    spectral_report_raw(q.matrix(), q.target().probs())
}

/// `‖Qⁿ − Π‖_π` for `n = 1, …, n_max`, computed as `‖(Q − Π)ⁿ‖_π`.
///
/// Powers of the centered operator avoid the cancellation in `Qⁿ − Π` once
/// `Qⁿ` is within rounding of `Π`.
pub fn power_norm_rate(q: &ProjectorMatrix, n_max: usize) -> Vec<f64> {
    let a = symmetrize(&q.centered(), q.target().probs());
    let mut power = a.clone();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            power = &power * &a;
        }
        out.push(spectral_norm(&power));
    }
    out
}

/// Nonzero part of a spectrum (modulus at least `tol`), in canonical order.
pub fn nonzero_spectrum(eigs: &[Complex64], tol: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = eigs.iter().copied().filter(|z| z.norm() >= tol).collect();
    sort_eigenvalues(&mut v);
    v
}

/// Largest elementwise deviation between two canonically sorted multisets, or
/// `None` when their sizes differ.
pub fn multiset_deviation(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// Whether the nonzero parts of two spectra coincide as multisets within `tol`.
pub fn nonzero_spectra_match(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    let (a, b) = (nonzero_spectrum(a, tol), nonzero_spectrum(b, tol));
    matches!(multiset_deviation(&a, &b), Some(d) if d <= tol)
}

pub(crate) fn is_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { m[(i, j)] } else { m[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n == 0 || (reach(true) && reach(false))
}

/// True iff `1` is the only eigenvalue of `Q` within [`SPECTRAL_TOL`] of the
/// unit circle, and it is simple. Reducible operators are an error.
pub fn aperiodicity_check(q: &ProjectorMatrix) -> Result<bool> {
    aperiodicity_check_raw(q.matrix(), q.target().probs())
}

pub fn aperiodicity_check_raw(q: &DMatrix<f64>, probs: &[f64]) -> Result<bool> {
    if !is_irreducible(q) {
        return Err(Error::Reducible);
    }
    let (eigs, _) = pi_eigenvalues(q, probs)?;
    let on_circle: Vec<&Complex64> = eigs
        .iter()
        .filter(|z| z.norm() >= 1.0 - SPECTRAL_TOL)
        .collect();
    Ok(on_circle.len() == 1 && (on_circle[0] - Complex64::new(1.0, 0.0)).norm() < SPECTRAL_TOL)
}
