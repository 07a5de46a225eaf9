//! Gibbs steps, cycles and mixtures as dense Markov matrices on the flat state space.
//!
//! Row `x` of a matrix is the next-state distribution `Q(x, ·)`, so the matrix
//! acts on functions by `(Qf)(x) = Σ_y Q(x, y) f(y)`. For a cycle the steps are
//! multiplied in the order given: `cycle([P_1, P_2])` first runs the update of
//! `P_1` and then the update of `P_2`, which is the operator `P_1 P_2`.

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::target::{CoordinateSubset, JointTarget};

/// Tolerance for algebraic operator identities.
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    GibbsStep(CoordinateSubset),
    PiProjector,
    Cycle,
    Mixture,
    General,
}

/// A Markov operator on a finite target, stored as a dense row-stochastic matrix.
#[derive(Debug, Clone)]
pub struct ProjectorMatrix {
    matrix: DMatrix<f64>,
    target: Arc<JointTarget>,
    kind: OperatorKind,
}

/// Worst-case violations of the Markov-operator identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub row_sum: f64,
    pub stationarity: f64,
    pub self_adjointness: f64,
    pub idempotency: f64,
}

impl InvariantReport {
    /// True when every identity required for `kind` holds within `tol`.
    pub fn holds_for(&self, kind: &OperatorKind, tol: f64) -> bool {
        let base = self.row_sum <= tol && self.stationarity <= tol;
        match kind {
            OperatorKind::GibbsStep(_) | OperatorKind::PiProjector => {
                base && self.self_adjointness <= tol && self.idempotency <= tol
            }
            OperatorKind::Mixture => base && self.self_adjointness <= tol,
            OperatorKind::Cycle | OperatorKind::General => base,
        }
    }
}

impl ProjectorMatrix {
    pub fn new(matrix: DMatrix<f64>, target: Arc<JointTarget>, kind: OperatorKind) -> Result<Self> {
        let n = target.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            target,
            kind,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn target(&self) -> &Arc<JointTarget> {
        &self.target
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `Q − Π` as a plain matrix.
    pub fn centered(&self) -> DMatrix<f64> {
        &self.matrix - pi_matrix(self.target.probs())
    }

    pub fn invariants(&self) -> InvariantReport {
        let probs = self.target.probs();
        let m = &self.matrix;
        let n = m.nrows();
        let row_sum = (0..n)
            .map(|i| (m.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let stationarity = (0..n)
            .map(|j| ((0..n).map(|i| probs[i] * m[(i, j)]).sum::<f64>() - probs[j]).abs())
            .fold(0.0, f64::max);
        let mut self_adjointness: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                self_adjointness =
                    self_adjointness.max((probs[i] * m[(i, j)] - probs[j] * m[(j, i)]).abs());
            }
        }
        let idempotency = (m * m - m).abs().max();
        InvariantReport {
            row_sum,
            stationarity,
            self_adjointness,
            idempotency,
        }
    }

    /// Row-major CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn same_target(a: &Arc<JointTarget>, b: &Arc<JointTarget>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn pi_matrix(probs: &[f64]) -> DMatrix<f64> {
    let n = probs.len();
    DMatrix::from_fn(n, n, |_, j| probs[j])
}

/// Kernel that redraws the coordinates flagged in `resampled` from their
/// conditional law given the rest. All flags set gives `Π`; none gives the identity.
pub(crate) fn resample_kernel(target: &JointTarget, resampled: &[bool]) -> Result<DMatrix<f64>> {
    let space = target.space();
    let kept: Vec<usize> = (0..space.num_coords()).filter(|&i| !resampled[i]).collect();
    let probs = target.probs();
    let n = space.dim();
    let keys: Vec<usize> = (0..n).map(|x| space.sub_index(x, &kept)).collect();
    let mut mass = vec![0.0; space.sub_dim(&kept)];
    for (x, &p) in probs.iter().enumerate() {
        mass[keys[x]] += p;
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); mass.len()];
    for (x, &k) in keys.iter().enumerate() {
        groups[k].push(x);
    }
    let mut m = DMatrix::zeros(n, n);
    for (x, &k) in keys.iter().enumerate() {
        let total = mass[k];
        if !(total > 0.0) {
            return Err(Error::ZeroMassSlice);
        }
        for &y in &groups[k] {
            m[(x, y)] = probs[y] / total;
        }
    }
    Ok(m)
}

/// The Gibbs step that redraws `X_I` from `π(· | x_{-I})`.
pub fn gibbs_step(target: &Arc<JointTarget>, subset: &CoordinateSubset) -> Result<ProjectorMatrix> {
    if !target.is_strictly_positive() {
        return Err(Error::NotStrictlyPositive);
    }
    if subset.num_coords() != target.num_coords() {
        return Err(Error::InvalidSubset("subset and target disagree on K".into()));
    }
    let m = resample_kernel(target, &subset.mask())?;
    ProjectorMatrix::new(m, target.clone(), OperatorKind::GibbsStep(subset.clone()))
}

/// The rank-one projector `Π f ≡ π f`.
pub fn pi_projector(target: &Arc<JointTarget>) -> ProjectorMatrix {
    ProjectorMatrix {
        matrix: pi_matrix(target.probs()),
        target: target.clone(),
        kind: OperatorKind::PiProjector,
    }
}

fn covered(steps: &[ProjectorMatrix]) -> Result<Vec<bool>> {
    let k = steps[0].target.num_coords();
    let mut cov = vec![false; k];
    for s in steps {
        match &s.kind {
            OperatorKind::GibbsStep(sub) => sub.indices().iter().for_each(|&i| cov[i] = true),
            OperatorKind::PiProjector => cov.iter_mut().for_each(|c| *c = true),
            _ => {
                return Err(Error::InvalidFamily(
                    "cycles and mixtures are built from Gibbs steps".into(),
                ))
            }
        }
    }
    Ok(cov)
}

fn check_steps(steps: &[ProjectorMatrix]) -> Result<()> {
    let first = steps
        .first()
        .ok_or_else(|| Error::InvalidFamily("no steps given".into()))?;
    if steps.iter().any(|s| !same_target(&s.target, &first.target)) {
        return Err(Error::TargetMismatch);
    }
    if covered(steps)?.iter().any(|c| !c) {
        return Err(Error::InvalidFamily(
            "steps do not cover every coordinate".into(),
        ));
    }
    Ok(())
}

/// Product of the steps in chronological order (`P_1 ⋯ P_g`).
pub fn cycle(steps: &[ProjectorMatrix]) -> Result<ProjectorMatrix> {
    check_steps(steps)?;
    let mut m = steps[0].matrix.clone();
    for s in &steps[1..] {
        m = m * &s.matrix;
    }
    ProjectorMatrix::new(m, steps[0].target.clone(), OperatorKind::Cycle)
}

/// Unchecked product of operators over a common target.
pub fn compose(ops: &[ProjectorMatrix]) -> Result<ProjectorMatrix> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidFamily("no operators given".into()))?;
    if ops.iter().any(|s| !same_target(&s.target, &first.target)) {
        return Err(Error::TargetMismatch);
    }
    let m = ops[1..].iter().fold(first.matrix.clone(), |acc, s| acc * &s.matrix);
    ProjectorMatrix::new(m, first.target.clone(), OperatorKind::General)
}

pub fn mixture(steps: &[ProjectorMatrix], weights: &WeightVector) -> Result<ProjectorMatrix> {
    check_steps(steps)?;
    if weights.len() != steps.len() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} steps",
            weights.len(),
            steps.len()
        )));
    }
    let n = steps[0].dim();
    let m = steps
        .iter()
        .zip(weights.as_slice())
        .fold(DMatrix::zeros(n, n), |acc, (s, &w)| acc + &s.matrix * w);
    ProjectorMatrix::new(m, steps[0].target.clone(), OperatorKind::Mixture)
}

/// Unchecked convex combination of operators over a common target.
pub fn combine(ops: &[ProjectorMatrix], weights: &WeightVector) -> Result<ProjectorMatrix> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidFamily("no operators given".into()))?;
    if ops.iter().any(|s| !same_target(&s.target, &first.target)) {
        return Err(Error::TargetMismatch);
    }
    if weights.len() != ops.len() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} operators",
            weights.len(),
            ops.len()
        )));
    }
    let n = first.dim();
    let m = ops
        .iter()
        .zip(weights.as_slice())
        .fold(DMatrix::zeros(n, n), |acc, (s, &w)| acc + &s.matrix * w);
    ProjectorMatrix::new(m, first.target.clone(), OperatorKind::General)
}

/// Adjoint in `L²(π)`: `D⁻¹ Qᵀ D` with `D = diag(π)`.
pub fn pi_adjoint(op: &ProjectorMatrix) -> ProjectorMatrix {
    let probs = op.target.probs();
    let n = op.dim();
    let m = DMatrix::from_fn(n, n, |i, j| op.matrix[(j, i)] * probs[j] / probs[i]);
    ProjectorMatrix {
        matrix: m,
        target: op.target.clone(),
        kind: op.kind.clone(),
    }
}

/// `D^{1/2} T D^{-1/2}`: the similarity under which `L²(π)` becomes Euclidean.
pub fn symmetrize(t: &DMatrix<f64>, probs: &[f64]) -> DMatrix<f64> {
    let sq: Vec<f64> = probs.iter().map(|p| p.sqrt()).collect();
    DMatrix::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)] * sq[i] / sq[j])
}

/// Operator norm of `T` on `L²(π)`.
pub fn pi_norm(t: &DMatrix<f64>, probs: &[f64]) -> f64 {
    spectral_norm(&symmetrize(t, probs))
}

pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    a.singular_values().max()
}

/// `‖P_A P_B − P_B P_A‖_π`.
pub fn commutator_norm(a: &ProjectorMatrix, b: &ProjectorMatrix) -> Result<f64> {
    if !same_target(&a.target, &b.target) {
        return Err(Error::TargetMismatch);
    }
    let c = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    Ok(pi_norm(&c, a.target.probs()))
}

/// Index sets `I_1, …, I_g` of a cycle or mixture, covering every coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFamily {
    subsets: Vec<CoordinateSubset>,
}

impl StepFamily {
    pub fn new(subsets: Vec<CoordinateSubset>) -> Result<Self> {
        if subsets.len() < 2 {
            return Err(Error::InvalidFamily("need at least two steps".into()));
        }
        let k = subsets[0].num_coords();
        if subsets.iter().any(|s| s.num_coords() != k) {
            return Err(Error::InvalidFamily("subsets disagree on K".into()));
        }
        let mut cov = vec![false; k];
        for s in &subsets {
            s.indices().iter().for_each(|&i| cov[i] = true);
        }
        if let Some(missing) = cov.iter().position(|c| !c) {
            return Err(Error::InvalidFamily(format!(
                "coordinate {missing} is never updated"
            )));
        }
        Ok(Self { subsets })
    }

    /// Builds a family from raw index lists.
    pub fn from_indices(lists: &[&[usize]], num_coords: usize) -> Result<Self> {
        let subsets = lists
            .iter()
            .map(|l| CoordinateSubset::new(l.to_vec(), num_coords))
            .collect::<Result<Vec<_>>>()?;
        Self::new(subsets)
    }

    /// The single-coordinate family `{0}, {1}, …, {K-1}`.
    pub fn full(num_coords: usize) -> Result<Self> {
        let subsets = (0..num_coords)
            .map(|i| CoordinateSubset::new(vec![i], num_coords))
            .collect::<Result<Vec<_>>>()?;
        Self::new(subsets)
    }

    pub fn subsets(&self) -> &[CoordinateSubset] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn num_coords(&self) -> usize {
        self.subsets[0].num_coords()
    }

    pub fn steps(&self, target: &Arc<JointTarget>) -> Result<Vec<ProjectorMatrix>> {
        self.subsets.iter().map(|s| gibbs_step(target, s)).collect()
    }

    pub fn cycle(&self, target: &Arc<JointTarget>, order: &Permutation) -> Result<ProjectorMatrix> {
        let steps = self.steps(target)?;
        cycle(&order.apply(&steps)?)
    }

    pub fn mixture(&self, target: &Arc<JointTarget>, weights: &WeightVector) -> Result<ProjectorMatrix> {
        mixture(&self.steps(target)?, weights)
    }
}

/// A point in the open probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidWeights("weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(g: usize) -> Self {
        Self(vec![1.0 / g as f64; g])
    }

    /// A symmetric Dirichlet(1) draw.
    pub fn dirichlet<R: Rng + ?Sized>(g: usize, rng: &mut R) -> Self {
        loop {
            let raw: Vec<f64> = (0..g).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            if w.iter().all(|&x| x > 0.0) {
                return Self(w);
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A bijection on `{0, …, g-1}`; `order[i]` is the family index used at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return Err(Error::InvalidFamily(format!("{order:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(g: usize) -> Self {
        Self((0..g).collect())
    }

    pub fn reversed(g: usize) -> Self {
        Self((0..g).rev().collect())
    }

    /// Every permutation of `{0, …, g-1}` in lexicographic order.
    pub fn all(g: usize) -> Vec<Self> {
        (0..g).permutations(g).map(Self).collect()
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        if items.len() != self.0.len() {
            return Err(Error::InvalidFamily(format!(
                "permutation of {} applied to {} items",
                self.0.len(),
                items.len()
            )));
        }
        Ok(self.0.iter().map(|&i| items[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{build_target, conditional_independence_gap};
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn arc(t: JointTarget) -> Arc<JointTarget> {
        Arc::new(t)
    }

    fn rho_pair(rho: f64) -> Arc<JointTarget> {
        let a = (1.0 + rho) / 4.0;
        let b = (1.0 - rho) / 4.0;
        arc(build_target(&[2, 2], &[a, b, b, a]).unwrap())
    }

    fn random_target(sizes: &[usize], seed: u64) -> Arc<JointTarget> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = sizes.iter().product();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        arc(build_target(sizes, &w).unwrap())
    }

    fn independent_pair(mu: [f64; 2], nu: [f64; 2]) -> Arc<JointTarget> {
        let w: Vec<f64> = mu.iter().flat_map(|a| nu.iter().map(move |b| a * b)).collect();
        arc(build_target(&[2, 2], &w).unwrap())
    }

    fn sub(t: &JointTarget, i: &[usize]) -> CoordinateSubset {
        t.subset(i).unwrap()
    }

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    // direct general eigensolve, independent of the spectral module's route
    fn sorted_abs_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    #[test]
    fn uniform_step_averages_first_coordinate() {
        let t = arc(build_target(&[2, 2], &[1.0; 4]).unwrap());
        let p = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let expect = if x % 2 == y % 2 { 0.5 } else { 0.0 };
                assert_eq!(p.matrix()[(x, y)], expect);
            }
        }
    }

    #[test]
    fn correlated_step_rows() {
        let t = rho_pair(0.5);
        let p = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let expect = [
            [0.75, 0.0, 0.25, 0.0],
            [0.0, 0.25, 0.0, 0.75],
            [0.75, 0.0, 0.25, 0.0],
            [0.0, 0.25, 0.0, 0.75],
        ];
        for (x, row) in expect.iter().enumerate() {
            for (y, &e) in row.iter().enumerate() {
                assert!((p.matrix()[(x, y)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn leading_block_step_has_identical_rows_per_last_coordinate() {
        let t = random_target(&[2, 3, 2], 1);
        let p = gibbs_step(&t, &sub(&t, &[0, 1])).unwrap();
        let m = p.matrix();
        for x in 0..12 {
            for x2 in 0..12 {
                if x % 2 == x2 % 2 {
                    assert!((m.row(x) - m.row(x2)).amax() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn step_requires_positive_target() {
        let t = arc(build_target(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap());
        assert_eq!(
            gibbs_step(&t, &sub(&t, &[0])).unwrap_err(),
            Error::NotStrictlyPositive
        );
    }

    #[test]
    fn pi_projector_properties() {
        let t = arc(build_target(&[2, 2], &[1.0; 4]).unwrap());
        let pi = pi_projector(&t);
        assert!(pi.matrix().iter().all(|&x| x == 0.25));
        let t = random_target(&[2, 3, 2], 2);
        let pi = pi_projector(&t);
        assert!(max_diff(&(pi.matrix() * pi.matrix()), pi.matrix()) < 1e-12);
        for i in 0..3 {
            let p = gibbs_step(&t, &sub(&t, &[i])).unwrap();
            assert!(max_diff(&(pi.matrix() * p.matrix()), pi.matrix()) < ALGEBRA_TOL);
        }
    }

    #[test]
    fn cycle_on_independent_target_is_pi() {
        let w: Vec<f64> = [0.2, 0.8]
            .iter()
            .flat_map(|a| [0.1, 0.3, 0.6].iter().flat_map(move |b| [0.5, 0.5].iter().map(move |c| a * b * c)))
            .collect();
        let t = arc(build_target(&[2, 3, 2], &w).unwrap());
        let q = StepFamily::full(3).unwrap().cycle(&t, &Permutation::identity(3)).unwrap();
        assert!(max_diff(q.matrix(), pi_projector(&t).matrix()) < 1e-14);
    }

    #[test]
    fn repeated_step_is_idempotent() {
        let t = random_target(&[2, 3], 4);
        let p = gibbs_step(&t, &sub(&t, &[1])).unwrap();
        let pp = compose(&[p.clone(), p.clone()]).unwrap();
        assert!(max_diff(pp.matrix(), p.matrix()) < ALGEBRA_TOL);
    }

    #[test]
    fn cycle_order_convention_matches_hand_computation() {
        // rho = 0.5: P_{E1} P_{E2} computed by hand.
        // P_{E1}[x, y] = pi(y_1 | x_2) if y_2 = x_2; P_{E2}[x, y] = pi(y_2 | x_1) if y_1 = x_1.
        // Row (0,0): first draw y_1 ~ (3/4, 1/4) keeping x_2 = 0, then y_2 given y_1.
        //   -> (0,0): 3/4*3/4, (0,1): 3/4*1/4, (1,0): 1/4*1/4, (1,1): 1/4*3/4
        let t = rho_pair(0.5);
        let q = StepFamily::full(2).unwrap().cycle(&t, &Permutation::identity(2)).unwrap();
        let row0 = [9.0 / 16.0, 3.0 / 16.0, 1.0 / 16.0, 3.0 / 16.0];
        let row1 = [3.0 / 16.0, 1.0 / 16.0, 3.0 / 16.0, 9.0 / 16.0];
        for j in 0..4 {
            assert!((q.matrix()[(0, j)] - row0[j]).abs() < 1e-15);
            assert!((q.matrix()[(2, j)] - row0[j]).abs() < 1e-15);
            assert!((q.matrix()[(1, j)] - row1[j]).abs() < 1e-15);
            assert!((q.matrix()[(3, j)] - row1[j]).abs() < 1e-15);
        }
        // Brute-force 4x4 spectrum of Q − Π: one nonzero eigenvalue rho² = 0.25.
        let eigs = sorted_abs_eigs(&q.centered());
        assert!((eigs[0] - 0.25).abs() < 1e-12);
        assert!(eigs[1] < 1e-12);
    }

    #[test]
    fn cycle_errors() {
        let t = random_target(&[2, 2, 2], 1);
        let s = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let s2 = gibbs_step(&t, &sub(&t, &[1])).unwrap();
        assert!(matches!(cycle(&[s.clone(), s2.clone()]), Err(Error::InvalidFamily(_))));
        let other = random_target(&[2, 2, 2], 2);
        let s3 = gibbs_step(&other, &sub(&other, &[1, 2])).unwrap();
        assert_eq!(cycle(&[s, s3]).unwrap_err(), Error::TargetMismatch);
    }

    #[test]
    fn mixture_of_duplicate_step_is_that_step() {
        let t = random_target(&[2, 3], 9);
        let p = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        assert!(mixture(&[p.clone(), p.clone()], &WeightVector::uniform(2)).is_err());
        let m = combine(&[p.clone(), p.clone()], &WeightVector::uniform(2)).unwrap();
        assert!(max_diff(m.matrix(), p.matrix()) < 1e-15);
    }

    #[test]
    fn independent_mixture_radius_is_max_weight() {
        let t = independent_pair([0.3, 0.7], [0.6, 0.4]);
        let w = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let q = StepFamily::full(2).unwrap().mixture(&t, &w).unwrap();
        let eigs = sorted_abs_eigs(&q.centered());
        assert!((eigs[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn uniform_mixture_is_doubly_stochastic_and_symmetric() {
        let t = arc(build_target(&[2, 2], &[1.0; 4]).unwrap());
        let q = StepFamily::full(2).unwrap().mixture(&t, &WeightVector::uniform(2)).unwrap();
        let m = q.matrix();
        assert!(max_diff(m, &m.transpose()) < 1e-15);
        for j in 0..4 {
            assert!((m.column(j).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_weight_errors() {
        let t = random_target(&[2, 2], 3);
        let f = StepFamily::full(2).unwrap();
        assert!(f.mixture(&t, &WeightVector::uniform(3)).is_err());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn adjoints() {
        let t = random_target(&[2, 3, 2], 5);
        for i in 0..3 {
            let p = gibbs_step(&t, &sub(&t, &[i])).unwrap();
            assert!(max_diff(pi_adjoint(&p).matrix(), p.matrix()) < ALGEBRA_TOL);
        }
        let t = random_target(&[3, 2], 6);
        let f = StepFamily::full(2).unwrap();
        let fwd = f.cycle(&t, &Permutation::identity(2)).unwrap();
        let rev = f.cycle(&t, &Permutation::reversed(2)).unwrap();
        assert!(max_diff(pi_adjoint(&fwd).matrix(), rev.matrix()) < ALGEBRA_TOL);
        let pi = pi_projector(&t);
        assert!(max_diff(pi_adjoint(&pi).matrix(), pi.matrix()) < 1e-15);
    }

    #[test]
    fn norms() {
        let t = arc(build_target(&[2, 2], &[1.0; 4]).unwrap());
        assert!((pi_norm(pi_projector(&t).matrix(), t.probs()) - 1.0).abs() < 1e-12);
        assert_eq!(pi_norm(&DMatrix::zeros(4, 4), t.probs()), 0.0);

        let t = random_target(&[2, 3, 2], 8);
        let q = StepFamily::full(3).unwrap().mixture(&t, &WeightVector::uniform(3)).unwrap();
        let c = q.centered();
        let r = c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((pi_norm(&c, t.probs()) - r).abs() < 1e-9);
    }

    #[test]
    fn commutators() {
        let w: Vec<f64> = (0..8)
            .map(|x| {
                let (u, v, ww) = (x / 4, (x / 2) % 2, x % 2);
                let pw = [0.3, 0.7][ww];
                let pu = [[0.2, 0.8], [0.6, 0.4]][ww][u];
                let pv = [[0.5, 0.5], [0.9, 0.1]][ww][v];
                pw * pu * pv
            })
            .collect();
        let t = arc(build_target(&[2, 2, 2], &w).unwrap());
        let a = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let b = gibbs_step(&t, &sub(&t, &[1])).unwrap();
        assert!(commutator_norm(&a, &b).unwrap() < ALGEBRA_TOL);

        let t = independent_pair([0.1, 0.9], [0.35, 0.65]);
        let a = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let b = gibbs_step(&t, &sub(&t, &[1])).unwrap();
        assert!(commutator_norm(&a, &b).unwrap() < ALGEBRA_TOL);

        let t = random_target(&[2, 2, 2], 10);
        let a = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let b = gibbs_step(&t, &sub(&t, &[1])).unwrap();
        let c = commutator_norm(&a, &b).unwrap();
        let gap = conditional_independence_gap(&t, &sub(&t, &[0]), &sub(&t, &[1]), &sub(&t, &[2])).unwrap();
        assert!(c > 1e-6 && gap > 1e-6);
    }

    #[test]
    fn permutations() {
        assert_eq!(Permutation::all(3).len(), 6);
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.apply(&['a', 'b', 'c']).unwrap(), vec!['c', 'a', 'b']);
    }

    #[test]
    fn csv_export_round_trips_digits() {
        let t = rho_pair(0.5);
        let p = gibbs_step(&t, &sub(&t, &[0])).unwrap();
        let csv = p.to_csv();
        let first: Vec<f64> = csv.lines().next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![0.75, 0.0, 0.25, 0.0]);
        assert_eq!(csv.lines().count(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_target() -> impl Strategy<Value = Arc<JointTarget>> {
            prop::collection::vec(2usize..=3, 2..=3).prop_flat_map(|sizes| {
                let n: usize = sizes.iter().product();
                prop::collection::vec(0.01f64..1.0, n)
                    .prop_map(move |w| Arc::new(build_target(&sizes, &w).unwrap()))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn gibbs_steps_are_orthogonal_projections(t in arb_target(), which in 0usize..3) {
                let k = t.num_coords();
                let p = gibbs_step(&t, &t.subset(&[which % k]).unwrap()).unwrap();
                let inv = p.invariants();
                prop_assert!(inv.holds_for(p.kind(), ALGEBRA_TOL), "{inv:?}");
                let s = symmetrize(p.matrix(), t.probs());
                prop_assert!(max_diff(&s, &s.transpose()) < ALGEBRA_TOL);
            }

            #[test]
            fn centered_powers_match(t in arb_target()) {
                let k = t.num_coords();
                let f = StepFamily::full(k).unwrap();
                let pi = pi_projector(&t);
                for q in [f.cycle(&t, &Permutation::identity(k)).unwrap(), f.mixture(&t, &WeightVector::uniform(k)).unwrap()] {
                    prop_assert!(max_diff(&(pi.matrix() * q.matrix()), pi.matrix()) < ALGEBRA_TOL);
                    prop_assert!(max_diff(&(q.matrix() * pi.matrix()), pi.matrix()) < ALGEBRA_TOL);
                    let c = q.centered();
                    let mut qn = q.matrix().clone();
                    let mut cn = c.clone();
                    for _ in 2..=5 {
                        qn = &qn * q.matrix();
                        cn = &cn * &c;
                        prop_assert!(max_diff(&(&qn - pi.matrix()), &cn) < ALGEBRA_TOL);
                    }
                }
            }

            #[test]
            fn commuting_iff_conditionally_independent(t in arb_target()) {
                prop_assume!(t.num_coords() == 3);
                let s = |i: usize| t.subset(&[i]).unwrap();
                let a = gibbs_step(&t, &s(0)).unwrap();
                let b = gibbs_step(&t, &s(1)).unwrap();
                let c = commutator_norm(&a, &b).unwrap();
                let g = conditional_independence_gap(&t, &s(0), &s(1), &s(2)).unwrap();
                prop_assert_eq!(c < 1e-10, g < 1e-10);
            }
        }
    }
}
