//! Collapsed Gibbs steps on marginal targets and the spectral identities that
//! tie them to steps on the joint target.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    cycle, gibbs_step, mixture, pi_adjoint, pi_matrix, pi_norm, resample_kernel, ProjectorMatrix,
    WeightVector, ALGEBRA_TOL,
};
use crate::spectral::{
    multiset_deviation, nonzero_spectrum, pi_eigenvalues, Complex64, Eigenvalue, SPECTRAL_TOL,
};
use crate::target::{
    conditional_independence_gap, independence_gap, marginalize, CoordinateSubset, JointTarget,
    MarginalTarget,
};

/// The lift `Φ f_I = f_I ∘ proj_I` from `L²(π_I)` into `L²(π)`, together with
/// its inverse on the range, restriction to the slice `x_{-I} = 0`.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    pub matrix: DMatrix<f64>,
    pub restriction: DMatrix<f64>,
    pub subset: CoordinateSubset,
}

impl EmbeddingMatrix {
    pub fn lift(&self, f: &[f64]) -> Vec<f64> {
        (&self.matrix * nalgebra::DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect()
    }

    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        (&self.restriction * nalgebra::DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect()
    }

    /// `max |ΦᵀDΦ − D_I|`.
    pub fn isometry_deviation(&self, joint: &[f64], marginal: &[f64]) -> f64 {
        let m = &self.matrix;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(joint));
        let gram = m.transpose() * d * m;
        let di = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(marginal));
        (gram - di).abs().max()
    }
}

fn check_k(target: &JointTarget, s: &CoordinateSubset) -> Result<()> {
    if s.num_coords() != target.num_coords() {
        return Err(Error::InvalidSubset(format!(
            "subset built for K = {}, target has K = {}",
            s.num_coords(),
            target.num_coords()
        )));
    }
    Ok(())
}

pub fn build_embedding(target: &JointTarget, subset: &CoordinateSubset) -> Result<EmbeddingMatrix> {
    check_k(target, subset)?;
    let space = target.space();
    let coords = subset.indices();
    let n = space.dim();
    let m = space.sub_dim(coords);
    let mut matrix = DMatrix::zeros(n, m);
    let mut restriction = DMatrix::zeros(m, n);
    for x in 0..n {
        let a = space.sub_index(x, coords);
        matrix[(x, a)] = 1.0;
        if subset.complement().iter().all(|&c| space.coord(x, c) == 0) {
            restriction[(a, x)] = 1.0;
        }
    }
    Ok(EmbeddingMatrix {
        matrix,
        restriction,
        subset: subset.clone(),
    })
}

/// Position of each coordinate of `j` inside `i`, as a subset of `|I|` coordinates.
fn local_subset(i: &CoordinateSubset, j: &CoordinateSubset, allow_equal: bool) -> Result<Option<CoordinateSubset>> {
    if j.num_coords() != i.num_coords() || !i.is_superset_of(j) {
        return Err(Error::Precondition(format!(
            "{:?} is not a subset of {:?}",
            j.indices(),
            i.indices()
        )));
    }
    if j.len() == i.len() {
        return if allow_equal {
            Ok(None)
        } else {
            Err(Error::Precondition("collapsed step needs a proper subset".into()))
        };
    }
    let pos: Vec<usize> = j
        .indices()
        .iter()
        .map(|c| i.indices().iter().position(|d| d == c).unwrap())
        .collect();
    Ok(Some(CoordinateSubset::new(pos, i.len())?))
}

fn marginal_joint(marginal: &MarginalTarget) -> Result<Arc<JointTarget>> {
    if marginal.subset().len() < 2 {
        return Err(Error::Precondition(
            "collapsed steps need at least two retained coordinates".into(),
        ));
    }
    Ok(Arc::new(marginal.to_joint()?))
}

fn collapsed_on(t: &Arc<JointTarget>, marginal: &MarginalTarget, j: &CoordinateSubset) -> Result<ProjectorMatrix> {
    let local = local_subset(marginal.subset(), j, false)?.expect("proper subset");
    gibbs_step(t, &local)
}

/// Gibbs step on `π_I` redrawing the coordinates `J ⊊ I` (given in the
/// numbering of the joint target).
pub fn collapsed_step(marginal: &MarginalTarget, j: &CoordinateSubset) -> Result<ProjectorMatrix> {
    let t = marginal_joint(marginal)?;
    collapsed_on(&t, marginal, j)
}

/// Joint step redrawing `J ∪ ([K] ∖ I)`, or `Π` when that is everything.
fn joint_step_matrix(target: &JointTarget, i: &CoordinateSubset, j: &CoordinateSubset) -> Result<DMatrix<f64>> {
    let mask: Vec<bool> = (0..target.num_coords())
        .map(|c| j.contains(c) || !i.contains(c))
        .collect();
    resample_kernel(target, &mask)
}

/// `max |P_{F_J ∩ F} Φ − Φ P_{F_J^{(I)}}|`, where `F` is the space of functions
/// of `x_I` alone. `J = I` compares `Π Φ` with `Φ Π_I`.
pub fn similarity_deviation(target: &JointTarget, i: &CoordinateSubset, j: &CoordinateSubset) -> Result<f64> {
    check_k(target, i)?;
    let local = local_subset(i, j, true)?;
    let marginal = marginalize(target, i)?;
    let collapsed = match local {
        None => pi_matrix(marginal.probs()),
        Some(l) => {
            if !target.is_strictly_positive() {
                return Err(Error::NotStrictlyPositive);
            }
            resample_kernel(&marginal.to_joint()?, &l.mask())?
        }
    };
    let phi = build_embedding(target, i)?.matrix;
    let joint = joint_step_matrix(target, i, j)?;
    Ok((joint * &phi - phi * collapsed).abs().max())
}

pub fn similarity_check(target: &JointTarget, i: &CoordinateSubset, j: &CoordinateSubset) -> Result<bool> {
    Ok(similarity_deviation(target, i, j)? <= ALGEBRA_TOL)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumComparison {
    /// Nonzero eigenvalues of the first operator minus its projector.
    pub left: Vec<Eigenvalue>,
    pub right: Vec<Eigenvalue>,
    /// `None` when the multisets differ in size.
    pub max_deviation: Option<f64>,
    pub matches: bool,
}

fn centered_eigs(q: &DMatrix<f64>, probs: &[f64]) -> Result<Vec<Complex64>> {
    Ok(pi_eigenvalues(&(q - pi_matrix(probs)), probs)?.0)
}

fn compare(a: &[Complex64], b: &[Complex64]) -> SpectrumComparison {
    let (a, b) = (nonzero_spectrum(a, SPECTRAL_TOL), nonzero_spectrum(b, SPECTRAL_TOL));
    let max_deviation = multiset_deviation(&a, &b);
    SpectrumComparison {
        matches: matches!(max_deviation, Some(d) if d <= SPECTRAL_TOL),
        max_deviation,
        left: a.into_iter().map(Eigenvalue::from).collect(),
        right: b.into_iter().map(Eigenvalue::from).collect(),
    }
}

fn is_real(eigs: &[Eigenvalue]) -> bool {
    eigs.iter().all(|e| e.1.abs() <= SPECTRAL_TOL)
}

#[derive(Debug, Clone)]
pub enum CollapseMode {
    Cycle,
    Mixture(WeightVector),
}

/// A joint-target operator and its collapsed counterpart on `π_I`.
#[derive(Debug, Clone)]
pub struct CollapsedPair {
    pub joint_op: ProjectorMatrix,
    pub marginal_op: ProjectorMatrix,
    pub spectra: SpectrumComparison,
    pub all_real: bool,
}

/// Builds the cycle or mixture of the joint steps `J_d ∪ ([K] ∖ I)` and of the
/// collapsed steps `J_d` on `π_I`, and compares the nonzero spectra of
/// `joint − Π` and `collapsed − Π_I`.
pub fn collapsed_spectral_check(
    target: &Arc<JointTarget>,
    i: &CoordinateSubset,
    family: &[CoordinateSubset],
    mode: &CollapseMode,
) -> Result<CollapsedPair> {
    check_k(target, i)?;
    if family.is_empty() {
        return Err(Error::InvalidFamily("no steps given".into()));
    }
    let mut union = vec![false; target.num_coords()];
    for j in family {
        local_subset(i, j, false)?;
        j.indices().iter().for_each(|&c| union[c] = true);
    }
    if i.indices().iter().any(|&c| !union[c]) {
        return Err(Error::Precondition("steps do not cover the retained coordinates".into()));
    }
    let marginal = marginalize(target, i)?;
    let mt = marginal_joint(&marginal)?;
    let joint_steps = family
        .iter()
        .map(|j| {
            let mut idx: Vec<usize> = j.indices().to_vec();
            idx.extend(i.complement());
            gibbs_step(target, &CoordinateSubset::new(idx, target.num_coords())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let marginal_steps = family
        .iter()
        .map(|j| collapsed_on(&mt, &marginal, j))
        .collect::<Result<Vec<_>>>()?;
    let (joint_op, marginal_op) = match mode {
        CollapseMode::Cycle => (cycle(&joint_steps)?, cycle(&marginal_steps)?),
        CollapseMode::Mixture(w) => (mixture(&joint_steps, w)?, mixture(&marginal_steps, w)?),
    };
    let spectra = compare(
        &centered_eigs(joint_op.matrix(), target.probs())?,
        &centered_eigs(marginal_op.matrix(), mt.probs())?,
    );
    let all_real = is_real(&spectra.left) && is_real(&spectra.right);
    Ok(CollapsedPair {
        joint_op,
        marginal_op,
        spectra,
        all_real,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockedVsCollapsed {
    pub applicable: bool,
    pub conditional_independence_gap: f64,
    /// `P_{E_U} P_{E_V ∩ E_W}` against the collapsed `U`, `W` cycle on `π_{UW}`.
    pub u_side: Option<SpectrumComparison>,
    /// `P_{E_V} P_{E_U ∩ E_W}` against the collapsed `V`, `W` cycle on `π_{VW}`.
    pub v_side: Option<SpectrumComparison>,
    pub holds: bool,
}

fn blocked_side(
    target: &Arc<JointTarget>,
    a: &CoordinateSubset,
    w: &CoordinateSubset,
) -> Result<SpectrumComparison> {
    let k = target.num_coords();
    let mut rest: Vec<usize> = (0..k).filter(|&c| !a.contains(c)).collect();
    rest.sort_unstable();
    let blocked = cycle(&[
        gibbs_step(target, a)?,
        gibbs_step(target, &CoordinateSubset::new(rest, k)?)?,
    ])?;
    let mut aw: Vec<usize> = a.indices().to_vec();
    aw.extend_from_slice(w.indices());
    let i = CoordinateSubset::new(aw, k)?;
    let marginal = marginalize(target, &i)?;
    let mt = marginal_joint(&marginal)?;
    let collapsed = cycle(&[collapsed_on(&mt, &marginal, a)?, collapsed_on(&mt, &marginal, w)?])?;
    Ok(compare(
        &centered_eigs(blocked.matrix(), target.probs())?,
        &centered_eigs(collapsed.matrix(), mt.probs())?,
    ))
}

/// Under `U ⊥ V | W`, compares the blocked two-step cycles with the collapsed
/// cycles on `π_{UW}` and `π_{VW}`. Reports `applicable = false` otherwise.
pub fn blocked_vs_collapsed_check(
    target: &Arc<JointTarget>,
    u: &CoordinateSubset,
    v: &CoordinateSubset,
    w: &CoordinateSubset,
) -> Result<BlockedVsCollapsed> {
    let gap = conditional_independence_gap(target, u, v, w)?;
    if gap >= ALGEBRA_TOL {
        return Ok(BlockedVsCollapsed {
            applicable: false,
            conditional_independence_gap: gap,
            u_side: None,
            v_side: None,
            holds: false,
        });
    }
    let u_side = blocked_side(target, u, w)?;
    let v_side = blocked_side(target, v, w)?;
    Ok(BlockedVsCollapsed {
        applicable: true,
        conditional_independence_gap: gap,
        holds: u_side.matches && v_side.matches,
        u_side: Some(u_side),
        v_side: Some(v_side),
    })
}

/// Which marginal chain of the two-component sampler to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanOrder {
    /// Update `Y` then `Z`; the induced chain lives on `Z`.
    YZ,
    /// Update `Z` then `Y`; the induced chain lives on `Y`.
    ZY,
}

#[derive(Debug, Clone)]
pub struct MarginalKernel {
    pub matrix: DMatrix<f64>,
    /// Stationary law of the chain (the marginal of its component).
    pub probs: Vec<f64>,
    /// The component's coordinates.
    pub coords: Vec<usize>,
    pub order: ScanOrder,
}

impl MarginalKernel {
    /// `max |D Q − (D Q)ᵀ|`.
    pub fn reversibility_deviation(&self) -> f64 {
        let n = self.probs.len();
        let dq = DMatrix::from_fn(n, n, |a, b| self.probs[a] * self.matrix[(a, b)]);
        (&dq - dq.transpose()).abs().max()
    }

    pub fn row_sum_deviation(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The chain on one component of the split `(Y, Z)`, `Z = [K] ∖ Y`:
/// `Q_Z(z, z′) = Σ_y π(y|z) π(z′|y)` for [`ScanOrder::YZ`], and symmetrically.
pub fn marginal_chain(target: &JointTarget, y: &CoordinateSubset, order: ScanOrder) -> Result<MarginalKernel> {
    check_k(target, y)?;
    let space = target.space();
    let yc = y.indices().to_vec();
    let zc = y.complement();
    // (traversed, kept): the chain lives on the kept component
    let (tc, kc) = match order {
        ScanOrder::YZ => (yc, zc),
        ScanOrder::ZY => (zc, yc),
    };
    let nt = space.sub_dim(&tc);
    let nk = space.sub_dim(&kc);
    let mut table = DMatrix::<f64>::zeros(nt, nk);
    for (x, &p) in target.probs().iter().enumerate() {
        table[(space.sub_index(x, &tc), space.sub_index(x, &kc))] += p;
    }
    let pt: Vec<f64> = table.row_iter().map(|r| r.sum()).collect();
    let pk: Vec<f64> = table.column_iter().map(|c| c.sum()).collect();
    if pt.iter().chain(&pk).any(|&m| !(m > 0.0)) {
        return Err(Error::ZeroMassSlice);
    }
    // k → t → k′
    let to_t = DMatrix::from_fn(nk, nt, |k, t| table[(t, k)] / pk[k]);
    let to_k = DMatrix::from_fn(nt, nk, |t, k| table[(t, k)] / pt[t]);
    Ok(MarginalKernel {
        matrix: to_t * to_k,
        probs: pk,
        coords: kc,
        order,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoComponentReport {
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    /// Nonzero spectra of `P_{E_Y}P_{E_Z} − Π`, `P_{E_Z}P_{E_Y} − Π`,
    /// `Q_Y − Π_Y` and `Q_Z − Π_Z`.
    pub cycle_yz: Vec<Eigenvalue>,
    pub cycle_zy: Vec<Eigenvalue>,
    pub q_y: Vec<Eigenvalue>,
    pub q_z: Vec<Eigenvalue>,
    pub max_deviation: Option<f64>,
    pub spectra_agree: bool,
    pub all_real: bool,
    pub spectral_radius: f64,
    /// `‖P_{E_Y}P_{E_Z} − (P_{E_Y}P_{E_Z})*‖_π`.
    pub self_adjointness_defect: f64,
    pub independence_gap: f64,
    /// The cycle is self-adjoint exactly when `Y` and `Z` are independent.
    pub self_adjoint_iff_independent: bool,
}

pub fn two_component_spectral_check(target: &Arc<JointTarget>, y: &CoordinateSubset) -> Result<TwoComponentReport> {
    check_k(target, y)?;
    let z = CoordinateSubset::new(y.complement(), target.num_coords())?;
    let py = gibbs_step(target, y)?;
    let pz = gibbs_step(target, &z)?;
    let yz = cycle(&[py.clone(), pz.clone()])?;
    let zy = cycle(&[pz, py])?;
    let qz = marginal_chain(target, y, ScanOrder::YZ)?;
    let qy = marginal_chain(target, y, ScanOrder::ZY)?;

    let probs = target.probs();
    let spectra = [
        centered_eigs(yz.matrix(), probs)?,
        centered_eigs(zy.matrix(), probs)?,
        centered_eigs(&qy.matrix, &qy.probs)?,
        centered_eigs(&qz.matrix, &qz.probs)?,
    ]
    .map(|e| nonzero_spectrum(&e, SPECTRAL_TOL));
    let max_deviation = spectra[1..]
        .iter()
        .map(|s| multiset_deviation(&spectra[0], s))
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)));
    let spectral_radius = spectra[3].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let [cycle_yz, cycle_zy, q_y, q_z] =
        spectra.map(|s| s.into_iter().map(Eigenvalue::from).collect::<Vec<_>>());
    let all_real = [&cycle_yz, &cycle_zy, &q_y, &q_z].iter().all(|s| is_real(s));

    let self_adjointness_defect = pi_norm(&(yz.matrix() - pi_adjoint(&yz).matrix()), probs);
    let independence_gap = independence_gap(target, y)?;
    Ok(TwoComponentReport {
        y: y.indices().to_vec(),
        z: z.indices().to_vec(),
        spectra_agree: matches!(max_deviation, Some(d) if d <= SPECTRAL_TOL),
        max_deviation,
        cycle_yz,
        cycle_zy,
        q_y,
        q_z,
        all_real,
        spectral_radius,
        self_adjoint_iff_independent: (self_adjointness_defect < ALGEBRA_TOL)
            == (independence_gap < ALGEBRA_TOL),
        self_adjointness_defect,
        independence_gap,
    })
}
