//! Checks for the solidarity and inheritance properties of spectral gaps across
//! cycles and mixtures built from a common family of Gibbs steps.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    pi_norm, resample_kernel, Permutation, ProjectorMatrix, StepFamily, WeightVector,
};
use crate::spectral::{spectral_report, Complex64, GAP_THRESHOLD, SPECTRAL_TOL};
use crate::target::{CoordinateSubset, JointTarget};

/// Largest family size for which every ordering is enumerated.
pub const MAX_ENUMERATED_STEPS: usize = 6;
/// Number of Dirichlet(1) weight draws used when none is specified.
pub const DEFAULT_WEIGHT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct OrderingGap {
    pub order: Vec<usize>,
    pub gap: f64,
    /// `‖cycle − Π‖_π`.
    pub pi_norm: f64,
    /// Distance from `1` to the nearest eigenvalue of `cycle − Π`.
    pub distance_to_one: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightGap {
    pub weights: Vec<f64>,
    pub gap: f64,
    pub pi_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolidarityVerdict {
    pub family: Vec<Vec<usize>>,
    pub all_have_gap: bool,
    pub per_ordering_gaps: Vec<OrderingGap>,
    pub per_weight_gaps: Vec<WeightGap>,
    /// `1 ∉ σ(cycle − Π) ⇔ ‖cycle − Π‖_π < 1 ⇔ ‖uniform mixture − Π‖_π < 1`
    /// held for every ordering.
    pub norm_equivalence: bool,
    pub consistent: bool,
}

fn family_indices(family: &StepFamily) -> Vec<Vec<usize>> {
    family.subsets().iter().map(|s| s.indices().to_vec()).collect()
}

fn weight_draws(g: usize, samples: usize, seed: u64) -> Vec<WeightVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::once(WeightVector::uniform(g))
        .chain((0..samples).map(|_| WeightVector::dirichlet(g, &mut rng)))
        .collect()
}

fn ordering_gaps(target: &Arc<JointTarget>, family: &StepFamily) -> Result<Vec<OrderingGap>> {
    let steps = family.steps(target)?;
    Permutation::all(family.len())
        .par_iter()
        .map(|perm| {
            let q = crate::operator::cycle(&perm.apply(&steps)?)?;
            let report = spectral_report(&q)?;
            let one = Complex64::new(1.0, 0.0);
            let distance_to_one = report
                .complex_eigenvalues()
                .iter()
                .map(|z| (z - one).norm())
                .fold(f64::INFINITY, f64::min);
            Ok(OrderingGap {
                order: perm.order().to_vec(),
                gap: report.gap,
                pi_norm: report.pi_operator_norm,
                distance_to_one,
            })
        })
        .collect()
}

fn weight_gaps(
    target: &Arc<JointTarget>,
    family: &StepFamily,
    weights: &[WeightVector],
) -> Result<Vec<WeightGap>> {
    let steps = family.steps(target)?;
    weights
        .par_iter()
        .map(|w| {
            let q = crate::operator::mixture(&steps, w)?;
            let report = spectral_report(&q)?;
            Ok(WeightGap {
                weights: w.as_slice().to_vec(),
                gap: report.gap,
                pi_norm: report.pi_operator_norm,
            })
        })
        .collect()
}

/// Builds every cycle ordering and `weight_samples` random mixtures (plus the
/// uniform one) of `family`, and checks that they agree on having a gap.
pub fn solidarity_suite(
    target: &Arc<JointTarget>,
    family: &StepFamily,
    weight_samples: usize,
    seed: u64,
) -> Result<SolidarityVerdict> {
    if family.len() > MAX_ENUMERATED_STEPS {
        return Err(Error::Precondition(format!(
            "{} steps is too many to enumerate every ordering (max {MAX_ENUMERATED_STEPS})",
            family.len()
        )));
    }
    if weight_samples == 0 {
        return Err(Error::Precondition("need at least one weight sample".into()));
    }
    let per_ordering_gaps = ordering_gaps(target, family)?;
    let weights = weight_draws(family.len(), weight_samples, seed);
    let per_weight_gaps = weight_gaps(target, family, &weights)?;

    let flags: Vec<bool> = per_ordering_gaps
        .iter()
        .map(|o| o.gap > GAP_THRESHOLD)
        .chain(per_weight_gaps.iter().map(|w| w.gap > GAP_THRESHOLD))
        .collect();
    let all_have_gap = flags.iter().all(|&f| f);
    let consistent = all_have_gap || flags.iter().all(|&f| !f);

    // per_weight_gaps[0] is the uniform mixture
    let uniform_contracts = per_weight_gaps[0].pi_norm < 1.0 - GAP_THRESHOLD;
    let norm_equivalence = per_ordering_gaps.iter().all(|o| {
        let one_outside = o.distance_to_one > SPECTRAL_TOL;
        let contracts = o.pi_norm < 1.0 - GAP_THRESHOLD;
        one_outside == contracts && contracts == uniform_contracts
    });

    Ok(SolidarityVerdict {
        family: family_indices(family),
        all_have_gap,
        per_ordering_gaps,
        per_weight_gaps,
        norm_equivalence,
        consistent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InheritanceReport {
    pub family: Vec<Vec<usize>>,
    pub full_cycle_gap: f64,
    pub full_mixture_gap: f64,
    pub cycle_gaps: Vec<OrderingGap>,
    pub mixture_gaps: Vec<WeightGap>,
    pub passes: bool,
}

/// Given that the full single-site sampler has a gap, checks that every
/// ordering and every tested mixture of `family` has one too.
pub fn inheritance_check(
    target: &Arc<JointTarget>,
    family: &StepFamily,
    weight_samples: usize,
    seed: u64,
) -> Result<InheritanceReport> {
    let k = target.num_coords();
    let full = StepFamily::full(k)?;
    let full_cycle_gap = spectral_report(&full.cycle(target, &Permutation::identity(k))?)?.gap;
    if full_cycle_gap <= GAP_THRESHOLD {
        return Err(Error::Precondition(format!(
            "full Gibbs sampler has no spectral gap (gap = {full_cycle_gap:e})"
        )));
    }
    let full_mixture_gap = spectral_report(&full.mixture(target, &WeightVector::uniform(k))?)?.gap;
    let cycle_gaps = ordering_gaps(target, family)?;
    let mixture_gaps = weight_gaps(target, family, &weight_draws(family.len(), weight_samples, seed))?;
    let passes = full_mixture_gap > GAP_THRESHOLD
        && cycle_gaps.iter().all(|c| c.gap > GAP_THRESHOLD)
        && mixture_gaps.iter().all(|m| m.gap > GAP_THRESHOLD);
    Ok(InheritanceReport {
        family: family_indices(family),
        full_cycle_gap,
        full_mixture_gap,
        cycle_gaps,
        mixture_gaps,
        passes,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormContraction {
    /// `‖P_M T‖_π`.
    pub intersection_norm: f64,
    /// `‖P_{M_1} ⋯ P_{M_N} T‖_π`.
    pub product_norm: f64,
    pub holds: bool,
}

/// Compares `‖P_M T‖_π` with `‖P_{M_1} ⋯ P_{M_N} T‖_π`, where `P_{M_i}` is the
/// Gibbs step on `subsets[i]` and `P_M` the step on their union (`Π` when the
/// union is every coordinate).
pub fn norm_contraction_check(
    subsets: &[CoordinateSubset],
    t: &DMatrix<f64>,
    target: &JointTarget,
) -> Result<NormContraction> {
    if subsets.len() < 2 {
        return Err(Error::InvalidFamily("need at least two subspaces".into()));
    }
    let n = target.dim();
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.nrows(),
        });
    }
    let k = target.num_coords();
    let mut union = vec![false; k];
    let mut product = DMatrix::<f64>::identity(n, n);
    for s in subsets {
        let mask = s.mask();
        mask.iter().enumerate().for_each(|(i, &m)| union[i] |= m);
        product *= resample_kernel(target, &mask)?;
    }
    let p_m = resample_kernel(target, &union)?;
    let intersection_norm = pi_norm(&(p_m * t), target.probs());
    let product_norm = pi_norm(&(product * t), target.probs());
    Ok(NormContraction {
        intersection_norm,
        product_norm,
        holds: intersection_norm <= product_norm + 1e-9,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MixtureOrdering {
    pub blocked_radius: f64,
    pub unblocked_radius: f64,
    pub holds: bool,
}

/// Checks `r(Σ w_d P_{F_d} − Π) ≤ r(Σ w_d P_{F'_d} − Π)` where the blocked
/// step `d` redraws a superset of the coordinates of unblocked step `d`.
pub fn mixture_ordering_check(
    target: &Arc<JointTarget>,
    family: &StepFamily,
    blocked_family: &StepFamily,
    weights: &WeightVector,
) -> Result<MixtureOrdering> {
    if family.len() != blocked_family.len() {
        return Err(Error::Precondition(
            "blocked and unblocked families differ in length".into(),
        ));
    }
    if let Some(d) = (0..family.len())
        .find(|&d| !blocked_family.subsets()[d].is_superset_of(&family.subsets()[d]))
    {
        return Err(Error::Precondition(format!(
            "blocked step {d} does not contain unblocked step {d}"
        )));
    }
    let blocked_radius = spectral_report(&blocked_family.mixture(target, weights)?)?.spectral_radius;
    let unblocked_radius = spectral_report(&family.mixture(target, weights)?)?.spectral_radius;
    Ok(MixtureOrdering {
        blocked_radius,
        unblocked_radius,
        holds: blocked_radius <= unblocked_radius + 1e-9,
    })
}

/// Set partitions of `{0, …, k−1}` with between `min_blocks` and
/// `max_blocks` blocks. Blocks are listed by least element.
pub fn set_partitions(k: usize, min_blocks: usize, max_blocks: usize) -> Vec<Vec<Vec<usize>>> {
    fn grow(i: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            grow(i + 1, k, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        grow(i + 1, k, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    grow(0, k, &mut Vec::new(), &mut out);
    out.retain(|p| p.len() >= min_blocks && p.len() <= max_blocks);
    out
}

/// Families of blocked samplers: partitions of `[K]` into `2..K` blocks.
pub fn blocked_families(k: usize) -> Result<Vec<StepFamily>> {
    set_partitions(k, 2, k.saturating_sub(1))
        .iter()
        .map(|p| {
            let lists: Vec<&[usize]> = p.iter().map(|b| b.as_slice()).collect();
            StepFamily::from_indices(&lists, k)
        })
        .collect()
}

fn family_label(f: &StepFamily) -> String {
    f.subsets()
        .iter()
        .map(|s| s.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// The cycles and mixtures exercised on every regression target: the full
/// sampler in identity and reversed order and as a uniform mixture, and each
/// blocked family as an identity-order cycle and a uniform mixture.
pub fn standard_operators(target: &Arc<JointTarget>) -> Result<Vec<(String, ProjectorMatrix)>> {
    let k = target.num_coords();
    let full = StepFamily::full(k)?;
    let mut ops = vec![
        ("full cycle".to_string(), full.cycle(target, &Permutation::identity(k))?),
        ("full reversed cycle".to_string(), full.cycle(target, &Permutation::reversed(k))?),
        ("full mixture".to_string(), full.mixture(target, &WeightVector::uniform(k))?),
    ];
    for f in blocked_families(k)? {
        let label = family_label(&f);
        ops.push((format!("cycle {label}"), f.cycle(target, &Permutation::identity(f.len()))?));
        ops.push((format!("mixture {label}"), f.mixture(target, &WeightVector::uniform(f.len()))?));
    }
    Ok(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::pi_projector;
    use crate::target::build_target;
    use rand::Rng;

    fn random_target(sizes: &[usize], seed: u64) -> Arc<JointTarget> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = sizes.iter().product();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        Arc::new(build_target(sizes, &w).unwrap())
    }

    fn independent(sizes: &[usize], seed: u64) -> Arc<JointTarget> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margins: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&s| (0..s).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect();
        let space = crate::target::ProductSpace::new(sizes.to_vec()).unwrap();
        let w: Vec<f64> = (0..space.dim())
            .map(|x| (0..sizes.len()).map(|i| margins[i][space.coord(x, i)]).product())
            .collect();
        Arc::new(build_target(sizes, &w).unwrap())
    }

    fn fam(lists: &[&[usize]], k: usize) -> StepFamily {
        StepFamily::from_indices(lists, k).unwrap()
    }

    #[test]
    fn partitions_are_counted_by_bell_numbers() {
        assert_eq!(set_partitions(3, 1, 3).len(), 5);
        assert_eq!(set_partitions(4, 1, 4).len(), 15);
        assert_eq!(set_partitions(4, 2, 3).len(), 13);
        assert!(set_partitions(2, 2, 1).is_empty());
        assert_eq!(blocked_families(3).unwrap().len(), 3);
    }

    #[test]
    fn standard_operator_list() {
        let t = random_target(&[2, 3, 2], 11);
        let ops = standard_operators(&t).unwrap();
        assert_eq!(ops.len(), 3 + 2 * 3);
        assert!(ops.iter().all(|(_, q)| q.invariants().holds_for(q.kind(), 1e-10)));
    }

    #[test]
    fn solidarity_on_single_sites() {
        let t = random_target(&[2, 2, 2], 1);
        let v = solidarity_suite(&t, &StepFamily::full(3).unwrap(), 8, 42).unwrap();
        assert_eq!(v.per_ordering_gaps.len(), 6);
        assert_eq!(v.per_weight_gaps.len(), 9);
        assert!(v.all_have_gap && v.consistent && v.norm_equivalence);
    }

    #[test]
    fn solidarity_on_overlapping_blocks() {
        let t = random_target(&[2, 2, 2], 2);
        let v = solidarity_suite(&t, &fam(&[&[0, 1], &[1, 2]], 3), 8, 7).unwrap();
        assert_eq!(v.per_ordering_gaps.len(), 2);
        assert!(v.all_have_gap && v.consistent && v.norm_equivalence);
    }

    #[test]
    fn solidarity_on_independent_target() {
        let t = independent(&[2, 3, 2], 3);
        let v = solidarity_suite(&t, &StepFamily::full(3).unwrap(), 4, 1).unwrap();
        assert!(v.consistent);
        for o in &v.per_ordering_gaps {
            assert!((o.gap - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn solidarity_rejects_large_families() {
        let subsets: Vec<_> = (0..7).map(|i| CoordinateSubset::new(vec![i], 7).unwrap()).collect();
        let f = StepFamily::new(subsets).unwrap();
        let t = Arc::new(build_target(&[2; 7], &[1.0; 128]).unwrap());
        assert!(matches!(solidarity_suite(&t, &f, 1, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn solidarity_is_deterministic() {
        let t = random_target(&[3, 2, 2], 4);
        let f = StepFamily::full(3).unwrap();
        let a = solidarity_suite(&t, &f, 3, 9).unwrap();
        let b = solidarity_suite(&t, &f, 3, 9).unwrap();
        assert_eq!(crate::report::to_json(&a), crate::report::to_json(&b));
    }

    #[test]
    fn inheritance_for_blocked_family() {
        let t = random_target(&[2, 2, 2], 5);
        let r = inheritance_check(&t, &fam(&[&[0], &[1, 2]], 3), 4, 0).unwrap();
        assert!(r.passes);
        // only positivity is claimed; record both numbers
        assert!(r.full_cycle_gap > 0.0 && r.cycle_gaps[0].gap > 0.0);
    }

    #[test]
    fn inheritance_on_independent_target() {
        let t = independent(&[2, 2, 3], 6);
        let r = inheritance_check(&t, &fam(&[&[0, 1], &[2]], 3), 2, 0).unwrap();
        assert!(r.cycle_gaps.iter().all(|c| (c.gap - 1.0).abs() < 1e-8));
    }

    #[test]
    fn norm_contraction_cases() {
        let t = random_target(&[2, 3, 2], 7);
        let subs = [
            t.subset(&[0]).unwrap(),
            t.subset(&[1]).unwrap(),
        ];
        let id = DMatrix::<f64>::identity(12, 12);
        let r = norm_contraction_check(&subs, &id, &t).unwrap();
        assert!(r.holds && r.product_norm <= 1.0 + 1e-12);
        let pi = pi_projector(&t);
        let r = norm_contraction_check(&subs, pi.matrix(), &t).unwrap();
        assert!((r.intersection_norm - 1.0).abs() < 1e-9 && (r.product_norm - 1.0).abs() < 1e-9);
        let q = StepFamily::full(3).unwrap().cycle(&t, &Permutation::identity(3)).unwrap();
        let r = norm_contraction_check(&subs, &q.centered(), &t).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn mixture_ordering_two_block_instance() {
        let t = random_target(&[2, 2, 2, 2], 8);
        let unblocked = fam(&[&[0], &[1], &[2], &[3]], 4);
        let blocked = fam(&[&[0], &[1, 2], &[1, 2], &[3]], 4);
        let r = mixture_ordering_check(&t, &unblocked, &blocked, &WeightVector::uniform(4)).unwrap();
        assert!(r.holds);
        let same = mixture_ordering_check(&t, &unblocked, &unblocked, &WeightVector::uniform(4)).unwrap();
        assert_eq!(same.blocked_radius, same.unblocked_radius);
    }

    #[test]
    fn mixture_ordering_rejects_non_containment() {
        let t = random_target(&[2, 2, 2], 9);
        let a = fam(&[&[0, 1], &[2]], 3);
        let b = fam(&[&[0], &[1, 2]], 3);
        assert!(mixture_ordering_check(&t, &a, &b, &WeightVector::uniform(2)).is_err());
    }
}
