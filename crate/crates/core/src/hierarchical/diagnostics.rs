//! Monte Carlo checks of the samplers: goodness of fit, invariance of the
//! posterior, the rejection step, and autocorrelation decay.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::density::k_cdf;
use super::model::{chain_rng, default_initial, run_chain, HierModel, HierState, Sampler};
use super::quad::integrate;

/// Significance level of the Kolmogorov–Smirnov tests.
pub const KS_ALPHA: f64 = 1e-3;
pub const MAX_LAG: usize = 50;
/// Pre-registered thresholds on the log-linear fit of the autocorrelations.
pub const GEOMETRIC_R2: f64 = 0.95;
pub const SUBGEOMETRIC_R2: f64 = 0.8;
pub const MIN_ERGODICITY_STEPS: usize = 100_000;
const SE_BOUND: f64 = 3.0;

pub fn cauchy_cdf(w: f64, y: f64) -> f64 {
    0.5 + (w - y).atan() / std::f64::consts::PI
}

/// CDF of the `U` marginal, chi-squared with one degree of freedom.
pub fn chi2_1_cdf(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        libm::erf((u / 2.0).sqrt())
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of the `V` marginal, the convolution of Cauchy(`y`, 1) with `N(0, 1)`.
pub fn v_marginal_cdf(v: f64, y: f64) -> Result<f64> {
    integrate(|z| normal_pdf(z) * cauchy_cdf(v - z, y), -10.0, 10.0, 1e-11)
}

/// `E h(U)` for `U ~ χ²₁`, integrating in `s = √u`.
pub fn chi2_1_expectation<H: Fn(f64) -> f64>(h: H) -> Result<f64> {
    integrate(|s| 2.0 * h(s * s) * normal_pdf(s), 0.0, 15.0, 1e-11)
}

/// `√(−ln(α/2)/2) / √n`, the asymptotic Kolmogorov critical value.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
    pub passes: bool,
}

fn ks_result(statistic: f64, n: usize) -> KsResult {
    let critical = ks_critical(n, KS_ALPHA);
    KsResult {
        n,
        statistic,
        critical,
        passes: statistic < critical,
    }
}

/// KS test of `n` independent block A transitions from `W = w` against `k(w, ·)`.
pub fn one_step_ks(model: &HierModel, w: f64, n: usize, seed: u64) -> Result<KsResult> {
    let start = HierState::new(1.0, w, w)?;
    let mut rng = chain_rng(seed, Sampler::BlockA.stream());
    let mut draws: Vec<f64> = (0..n).map(|_| model.step_block_a(&start, &mut rng).w).collect();
    let d = ks_statistic(&mut draws, |wp| k_cdf(w, wp, model.y));
    Ok(ks_result(d, n))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceBin {
    pub lo: f64,
    pub hi: f64,
    pub proposals: usize,
    pub observed: f64,
    /// Mean of `1/(1 + (y − w)²)` over the bin's proposals.
    pub expected: f64,
    pub standard_error: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceCurve {
    pub steps: usize,
    pub total_proposals: usize,
    pub min_bin_count: usize,
    pub bins: Vec<AcceptanceBin>,
    pub passes: bool,
}

/// Bins the block B proposals of a `steps`-long chain over `[y − 5, y + 5]`
/// and compares each bin's acceptance rate with the acceptance function.
pub fn acceptance_curve(model: &HierModel, steps: usize, n_bins: usize, seed: u64) -> Result<AcceptanceCurve> {
    const MIN_COUNT: usize = 1000;
    let (lo, hi) = (model.y - 5.0, model.y + 5.0);
    let width = (hi - lo) / n_bins as f64;
    let mut count = vec![0usize; n_bins];
    let mut accepted = vec![0usize; n_bins];
    let mut p_sum = vec![0.0; n_bins];
    let mut var_sum = vec![0.0; n_bins];
    let mut total = 0;
    let mut rng = chain_rng(seed, Sampler::BlockB.stream());
    let mut s = default_initial(model);
    for _ in 0..steps {
        s = model
            .step_block_b_traced(&s, &mut rng, |w, acc| {
                total += 1;
                if w >= lo && w < hi {
                    let b = (((w - lo) / width) as usize).min(n_bins - 1);
                    let p = model.acceptance_probability(w);
                    count[b] += 1;
                    accepted[b] += acc as usize;
                    p_sum[b] += p;
                    var_sum[b] += p * (1.0 - p);
                }
            })?
            .0;
    }
    let bins: Vec<AcceptanceBin> = (0..n_bins)
        .map(|b| {
            let n = count[b].max(1) as f64;
            let observed = accepted[b] as f64 / n;
            let expected = p_sum[b] / n;
            let standard_error = var_sum[b].sqrt() / n;
            AcceptanceBin {
                lo: lo + b as f64 * width,
                hi: lo + (b + 1) as f64 * width,
                proposals: count[b],
                observed,
                expected,
                standard_error,
                passes: count[b] >= MIN_COUNT && (observed - expected).abs() <= SE_BOUND * standard_error,
            }
        })
        .collect();
    Ok(AcceptanceCurve {
        steps,
        total_proposals: total,
        min_bin_count: count.iter().copied().min().unwrap_or(0),
        passes: bins.iter().all(|b| b.passes),
        bins,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub name: String,
    pub mean: f64,
    pub standard_error: f64,
    pub expected: f64,
    pub passes: bool,
}

fn moment_check(name: &str, xs: &[f64], expected: f64) -> MomentCheck {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let standard_error = (var / n).sqrt();
    MomentCheck {
        name: name.into(),
        mean,
        standard_error,
        expected,
        passes: (mean - expected).abs() <= SE_BOUND * standard_error,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub sampler: Sampler,
    pub replicates: usize,
    /// Block B steps whose `W` draw fell back to the envelope sampler.
    pub envelope_fallbacks: usize,
    pub ks_u: KsResult,
    pub ks_v: KsResult,
    pub ks_w: KsResult,
    pub moments: Vec<MomentCheck>,
    pub passes: bool,
}

/// Proposals tried before block B's `W` draw switches to the envelope sampler
/// in [`invariance_check`]. Stationary starts put `v` arbitrarily far in the
/// tails, where plain rejection needs about `(v − y)²` proposals.
pub const HYBRID_PROPOSALS: u64 = 1000;

/// Draws `replicates` exact posterior states, applies one sampler step to
/// each, and tests every coordinate against its posterior marginal.
pub fn invariance_check(model: &HierModel, sampler: Sampler, replicates: usize, seed: u64) -> Result<InvarianceReport> {
    let y = model.y;
    let mut rng = chain_rng(seed, sampler.stream());
    let mut next = Vec::with_capacity(replicates);
    let mut fallbacks = 0;
    for _ in 0..replicates {
        let s = model.posterior_draw(&mut rng);
        next.push(match sampler {
            Sampler::BlockA => model.step_block_a(&s, &mut rng),
            Sampler::BlockB => {
                let (t, used) = model.step_block_b_hybrid(&s, &mut rng, HYBRID_PROPOSALS);
                fallbacks += used as usize;
                t
            }
        });
    }
    let mut u: Vec<f64> = next.iter().map(|s| s.u).collect();
    let mut v: Vec<f64> = next.iter().map(|s| s.v).collect();
    let mut w: Vec<f64> = next.iter().map(|s| s.w).collect();

    let moments = vec![
        moment_check("arctan(W - y)", &w.iter().map(|w| (w - y).atan()).collect::<Vec<_>>(), 0.0),
        moment_check(
            "arctan(U)",
            &u.iter().map(|u| u.atan()).collect::<Vec<_>>(),
            chi2_1_expectation(f64::atan)?,
        ),
        moment_check("U", &u, chi2_1_expectation(|u| u)?),
    ];
    let ks_u = ks_result(ks_statistic(&mut u, chi2_1_cdf), replicates);
    let ks_w = ks_result(ks_statistic(&mut w, |x| cauchy_cdf(x, y)), replicates);
    v.sort_by(f64::total_cmp);
    let fv = v
        .par_iter()
        .map(|&x| v_marginal_cdf(x, y))
        .collect::<Result<Vec<_>>>()?;
    let n = replicates as f64;
    let dv = fv
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).max((i + 1) as f64 / n - f))
        .fold(0.0, f64::max);
    let ks_v = ks_result(dv, replicates);
    let passes = ks_u.passes && ks_v.passes && ks_w.passes && moments.iter().all(|m| m.passes);
    Ok(InvarianceReport {
        sampler,
        replicates,
        envelope_fallbacks: fallbacks,
        ks_u,
        ks_v,
        ks_w,
        moments,
        passes,
    })
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    (1..=max_lag.min(n.saturating_sub(1)))
        .into_par_iter()
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LogLinearFit {
    /// Lags with positive autocorrelation, which enter the fit.
    pub lags: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln ρ_k` on `k` over the lags with `ρ_k > 0`; `None`
/// with fewer than three such lags.
pub fn log_linear_fit(acf: &[f64]) -> Option<LogLinearFit> {
    let pts: Vec<(usize, f64)> = acf
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(i, &r)| (i + 1, r.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(LogLinearFit {
        lags: pts.iter().map(|p| p.0).collect(),
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Hill estimate of the tail index from the `k` largest values of `x`.
pub fn hill_estimator(x: &[f64], k: usize) -> Option<f64> {
    let mut v: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    if k == 0 || v.len() <= k {
        return None;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let threshold = v[k].ln();
    let mean = v[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    Some(1.0 / mean)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainDiagnostics {
    pub sampler: Sampler,
    /// Autocorrelations of `arctan(W − y)`, lags `1..=50`.
    pub acf: Vec<f64>,
    pub fit: Option<LogLinearFit>,
    /// Autocorrelations of `arctan|W − y|` and `arctan U`.
    pub acf_abs: Vec<f64>,
    pub fit_abs: Option<LogLinearFit>,
    pub acf_u: Vec<f64>,
    pub fit_u: Option<LogLinearFit>,
    /// Hill tail index of the one-step displacements `|W_{n+1} − W_n|`.
    pub displacement_tail_index: Option<f64>,
    pub max_excursion: f64,
    pub mean_rejections: Option<f64>,
}

fn diagnose(model: &HierModel, sampler: Sampler, steps: usize, seed: u64) -> Result<ChainDiagnostics> {
    let trace = run_chain(model, sampler, default_initial(model), steps, seed)?;
    let y = model.y;
    let w = trace.w();
    let series = |f: &dyn Fn(&HierState) -> f64| trace.states.iter().map(f).collect::<Vec<f64>>();
    let acf = autocorrelation(&series(&|s| (s.w - y).atan()), MAX_LAG);
    let acf_abs = autocorrelation(&series(&|s| (s.w - y).abs().atan()), MAX_LAG);
    let acf_u = autocorrelation(&series(&|s| s.u.atan()), MAX_LAG);
    let jumps: Vec<f64> = w.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let k = (jumps.len() as f64).sqrt() as usize;
    let mean_rejections = (!trace.rejection_counts.is_empty()).then(|| {
        trace.rejection_counts.iter().sum::<u64>() as f64 / trace.rejection_counts.len() as f64
    });
    Ok(ChainDiagnostics {
        sampler,
        fit: log_linear_fit(&acf),
        fit_abs: log_linear_fit(&acf_abs),
        fit_u: log_linear_fit(&acf_u),
        acf,
        acf_abs,
        acf_u,
        displacement_tail_index: hill_estimator(&jumps, k),
        max_excursion: w.iter().map(|w| (w - y).abs()).fold(0.0, f64::max),
        mean_rejections,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub y: f64,
    pub steps: usize,
    pub seed: u64,
    pub block_a: ChainDiagnostics,
    pub block_b: ChainDiagnostics,
    /// Block A's fit has `R² > 0.95`.
    pub geometric_a: bool,
    /// Block B's fit has `R² < 0.8`, or no fit exists.
    pub subgeometric_b: bool,
    pub passes: bool,
    pub note: String,
}

/// Runs both samplers from `(1, y, y)` on separate streams of `seed` and
/// compares the decay of their autocorrelations.
pub fn ergodicity_contrast(model: &HierModel, steps: usize, seed: u64) -> Result<ErgodicityReport> {
    if steps < MIN_ERGODICITY_STEPS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_ERGODICITY_STEPS} steps, got {steps}"
        )));
    }
    let (a, b) = rayon::join(
        || diagnose(model, Sampler::BlockA, steps, seed),
        || diagnose(model, Sampler::BlockB, steps, seed),
    );
    let (block_a, block_b) = (a?, b?);
    let geometric_a = block_a.fit.as_ref().is_some_and(|f| f.r_squared > GEOMETRIC_R2);
    let subgeometric_b = block_b.fit.as_ref().is_none_or(|f| f.r_squared < SUBGEOMETRIC_R2);
    Ok(ErgodicityReport {
        y: model.y,
        steps,
        seed,
        geometric_a,
        subgeometric_b,
        passes: geometric_a && subgeometric_b,
        block_a,
        block_b,
        note: "seeded diagnostic of autocorrelation decay, not a proof of (non-)geometric ergodicity".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_statistic_small_cases() {
        let mut x = vec![0.5];
        assert!((ks_statistic(&mut x, |t| t) - 0.5).abs() < 1e-15);
        let mut x = vec![0.75, 0.25];
        assert!((ks_statistic(&mut x, |t| t) - 0.25).abs() < 1e-15);
        assert!((ks_critical(1_000_000, 1e-3) - 1.9494 / 1000.0).abs() < 1e-7);
    }

    #[test]
    fn marginal_cdfs() {
        assert_eq!(cauchy_cdf(2.0, 2.0), 0.5);
        assert!((cauchy_cdf(3.0, 2.0) - 0.75).abs() < 1e-15);
        assert!((chi2_1_cdf(1.0) - 0.682_689_492_137_085_9).abs() < 1e-14);
        assert!((v_marginal_cdf(1.0, 1.0).unwrap() - 0.5).abs() < 1e-10);
        assert!(v_marginal_cdf(1e6, 0.0).unwrap() > 1.0 - 1e-5);
        assert!((chi2_1_expectation(|u| u).unwrap() - 1.0).abs() < 1e-10);
        assert!((chi2_1_expectation(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn acf_of_ar1() {
        let mut rng = chain_rng(1, 0);
        let mut x = vec![0.0f64];
        for _ in 0..200_000 {
            let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            x.push(0.6 * x.last().unwrap() + e);
        }
        let acf = autocorrelation(&x, 10);
        for (k, r) in acf.iter().enumerate() {
            assert!((r - 0.6f64.powi(k as i32 + 1)).abs() < 0.02);
        }
        let fit = log_linear_fit(&acf[..6]).unwrap();
        assert!(fit.r_squared > 0.99 && (fit.slope - 0.6f64.ln()).abs() < 0.1);
    }

    #[test]
    fn log_fit_needs_three_positive_lags() {
        assert!(log_linear_fit(&[0.5, -0.1, 0.2, -0.3]).is_none());
        let f = log_linear_fit(&[0.5, 0.25, 0.125]).unwrap();
        assert!((f.r_squared - 1.0).abs() < 1e-12 && (f.slope - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hill_on_pareto() {
        let mut rng = chain_rng(2, 0);
        let x: Vec<f64> = (0..100_000)
            .map(|_| rand::Rng::random::<f64>(&mut rng).powf(-1.0 / 2.0))
            .collect();
        let a = hill_estimator(&x, 2000).unwrap();
        assert!((a - 2.0).abs() < 0.15);
    }

    #[test]
    fn invariance_small() {
        let m = HierModel::new(7.0).unwrap();
        for sampler in [Sampler::BlockA, Sampler::BlockB] {
            let r = invariance_check(&m, sampler, 20_000, 3).unwrap();
            assert!(r.passes, "{r:?}");
        }
    }

    #[test]
    fn ergodicity_needs_long_runs() {
        assert!(ergodicity_contrast(&HierModel::default(), 10, 0).is_err());
    }
}
