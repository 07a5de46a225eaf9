//! Finite product-space targets, their marginals and conditionals.
//!
//! States of `X_1 × ⋯ × X_K` are addressed by a flat index in row-major order
//! with coordinate 0 varying slowest. Coordinates are numbered from 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for probability tensors.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A K-fold product of finite alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl ProductSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 coordinates, got {}",
                sizes.len()
            )));
        }
        if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
            return Err(Error::InvalidSpace(format!(
                "every alphabet needs at least 2 symbols, got {s}"
            )));
        }
        let strides = strides_for(&sizes);
        let dim = sizes.iter().product();
        Ok(Self {
            sizes,
            strides,
            dim,
        })
    }

    pub fn num_coords(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.sizes.len());
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| m * s)
            .sum()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.sizes.len()).map(|i| self.coord(flat, i)).collect()
    }

    /// Value of coordinate `i` at the state with the given flat index.
    #[inline]
    pub fn coord(&self, flat: usize, i: usize) -> usize {
        (flat / self.strides[i]) % self.sizes[i]
    }

    /// Flat index of the projection of `flat` onto `coords` (row-major in the
    /// order given).
    pub fn sub_index(&self, flat: usize, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.sizes[c] + self.coord(flat, c))
    }

    pub fn sub_dim(&self, coords: &[usize]) -> usize {
        coords.iter().map(|&c| self.sizes[c]).product()
    }
}

fn strides_for(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    strides
}

/// A sorted, nonempty, proper subset of the coordinates `{0, …, K-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoordinateSubset {
    indices: Vec<usize>,
    num_coords: usize,
}

impl CoordinateSubset {
    pub fn new(mut indices: Vec<usize>, num_coords: usize) -> Result<Self> {
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::InvalidSubset("duplicate coordinates".into()));
        }
        if indices.is_empty() {
            return Err(Error::InvalidSubset("subset is empty".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= num_coords) {
            return Err(Error::InvalidSubset(format!(
                "coordinate {i} out of range for K = {num_coords}"
            )));
        }
        if indices.len() == num_coords {
            return Err(Error::InvalidSubset(
                "subset must be proper (not all coordinates)".into(),
            ));
        }
        Ok(Self {
            indices,
            num_coords,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn num_coords(&self) -> usize {
        self.num_coords
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.num_coords).filter(|&i| !self.contains(i)).collect()
    }

    pub fn is_superset_of(&self, other: &CoordinateSubset) -> bool {
        other.indices.iter().all(|&i| self.contains(i))
    }

    pub(crate) fn mask(&self) -> Vec<bool> {
        (0..self.num_coords).map(|i| self.contains(i)).collect()
    }
}

/// A probability distribution on a finite product space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTarget {
    space: ProductSpace,
    probs: Vec<f64>,
    strictly_positive: bool,
}

/// Normalizes nonnegative weights into a target on the product of `component_sizes`.
pub fn build_target(component_sizes: &[usize], weights: &[f64]) -> Result<JointTarget> {
    let space = ProductSpace::new(component_sizes.to_vec())?;
    JointTarget::new(space, weights)
}

impl JointTarget {
    pub fn new(space: ProductSpace, weights: &[f64]) -> Result<Self> {
        if weights.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: weights.len(),
            });
        }
        let probs = normalize(weights)?;
        let strictly_positive = probs.iter().all(|&p| p > 0.0);
        Ok(Self {
            space,
            probs,
            strictly_positive,
        })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn num_coords(&self) -> usize {
        self.space.num_coords()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn subset(&self, indices: &[usize]) -> Result<CoordinateSubset> {
        CoordinateSubset::new(indices.to_vec(), self.num_coords())
    }
}

pub(crate) fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, &w)| w < 0.0 || w.is_nan())
    {
        return Err(Error::NegativeWeight { index, value });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroMass);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// The law of `X_I` under a joint target.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTarget {
    subset: CoordinateSubset,
    sizes: Vec<usize>,
    probs: Vec<f64>,
    parent_dim: usize,
}

impl MarginalTarget {
    pub fn subset(&self) -> &CoordinateSubset {
        &self.subset
    }

    /// Alphabet sizes of the retained coordinates, in ascending coordinate order.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Views the marginal as a joint target in its own right. Needs at least
    /// two retained coordinates.
    pub fn to_joint(&self) -> Result<JointTarget> {
        let space = ProductSpace::new(self.sizes.clone())?;
        JointTarget::new(space, &self.probs)
    }
}

pub fn marginalize(target: &JointTarget, subset: &CoordinateSubset) -> Result<MarginalTarget> {
    check_subset(target, subset)?;
    let space = target.space();
    let coords = subset.indices();
    let mut probs = vec![0.0; space.sub_dim(coords)];
    for (x, &p) in target.probs().iter().enumerate() {
        probs[space.sub_index(x, coords)] += p;
    }
    Ok(MarginalTarget {
        subset: subset.clone(),
        sizes: coords.iter().map(|&c| space.sizes()[c]).collect(),
        probs,
        parent_dim: space.dim(),
    })
}

fn check_subset(target: &JointTarget, subset: &CoordinateSubset) -> Result<()> {
    if subset.num_coords() != target.num_coords() {
        return Err(Error::InvalidSubset(format!(
            "subset built for K = {}, target has K = {}",
            subset.num_coords(),
            target.num_coords()
        )));
    }
    Ok(())
}

/// The law of `X_I` given `X_{-I} = x_{-I}`.
///
/// `x_minus_i` lists the values of the complement coordinates in ascending
/// coordinate order; the result is indexed by the flat index over `X_I`.
pub fn conditional(
    target: &JointTarget,
    subset: &CoordinateSubset,
    x_minus_i: &[usize],
) -> Result<Vec<f64>> {
    check_subset(target, subset)?;
    let space = target.space();
    let rest = subset.complement();
    if x_minus_i.len() != rest.len() {
        return Err(Error::DimensionMismatch {
            expected: rest.len(),
            got: x_minus_i.len(),
        });
    }
    for (&c, &v) in rest.iter().zip(x_minus_i) {
        if v >= space.sizes()[c] {
            return Err(Error::InvalidSubset(format!(
                "value {v} out of range for coordinate {c}"
            )));
        }
    }
    let coords = subset.indices();
    let mut slice = vec![0.0; space.sub_dim(coords)];
    let mut multi = vec![0; space.num_coords()];
    for (&c, &v) in rest.iter().zip(x_minus_i) {
        multi[c] = v;
    }
    for local in 0..slice.len() {
        let mut rem = local;
        for &c in coords.iter().rev() {
            multi[c] = rem % space.sizes()[c];
            rem /= space.sizes()[c];
        }
        slice[local] = target.probs()[space.flat_index(&multi)];
    }
    let mass: f64 = slice.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroMassSlice);
    }
    slice.iter_mut().for_each(|p| *p /= mass);
    Ok(slice)
}

/// Largest total-variation distance, over conditioning values `w` with
/// positive mass, between `π(u, v | w)` and `π(u | w) ⊗ π(v | w)`.
///
/// The three subsets must partition the coordinates.
pub fn conditional_independence_gap(
    target: &JointTarget,
    u: &CoordinateSubset,
    v: &CoordinateSubset,
    w: &CoordinateSubset,
) -> Result<f64> {
    for s in [u, v, w] {
        check_subset(target, s)?;
    }
    let k = target.num_coords();
    let mut seen = vec![0usize; k];
    for s in [u, v, w] {
        for &i in s.indices() {
            seen[i] += 1;
        }
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(Error::InvalidSubset(
            "U, V, W must partition the coordinates".into(),
        ));
    }
    Ok(dependence_gap(target, u.indices(), v.indices(), w.indices()))
}

/// Total-variation distance between the joint law of `(X_Y, X_{-Y})` and the
/// product of its marginals.
pub fn independence_gap(target: &JointTarget, y: &CoordinateSubset) -> Result<f64> {
    check_subset(target, y)?;
    Ok(dependence_gap(target, y.indices(), &y.complement(), &[]))
}

fn dependence_gap(target: &JointTarget, u: &[usize], v: &[usize], w: &[usize]) -> f64 {
    let space = target.space();
    let (nu, nv, nw) = (space.sub_dim(u), space.sub_dim(v), space.sub_dim(w));
    // joint[w][u][v]
    let mut joint = vec![0.0; nw * nu * nv];
    for (x, &p) in target.probs().iter().enumerate() {
        let (iu, iv, iw) = (
            space.sub_index(x, u),
            space.sub_index(x, v),
            space.sub_index(x, w),
        );
        joint[(iw * nu + iu) * nv + iv] += p;
    }
    let mut worst: f64 = 0.0;
    for iw in 0..nw {
        let block = &joint[iw * nu * nv..(iw + 1) * nu * nv];
        let mass: f64 = block.iter().sum();
        if !(mass > 0.0) {
            continue;
        }
        let pu: Vec<f64> = (0..nu)
            .map(|iu| block[iu * nv..(iu + 1) * nv].iter().sum::<f64>() / mass)
            .collect();
        let pv: Vec<f64> = (0..nv)
            .map(|iv| (0..nu).map(|iu| block[iu * nv + iv]).sum::<f64>() / mass)
            .collect();
        let tv = 0.5
            * (0..nu)
                .flat_map(|iu| (0..nv).map(move |iv| (iu, iv)))
                .map(|(iu, iv)| (block[iu * nv + iv] / mass - pu[iu] * pv[iv]).abs())
                .sum::<f64>();
        worst = worst.max(tv);
    }
    worst
}
