//! Command-line interface. Every command prints one JSON report on stdout
//! and exits with 0 (all checks pass), 1 (a check failed) or 2 (bad input).

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::collapse::{
    blocked_vs_collapsed_check, collapsed_spectral_check, similarity_deviation,
    two_component_spectral_check, BlockedVsCollapsed, CollapseMode, SpectrumComparison,
    TwoComponentReport,
};
use crate::error::{Error, Result};
use crate::fixtures::{builtin_fixtures, load_target, read_fixtures, write_fixtures, TargetFile};
use crate::hierarchical::model::{default_initial, run_chain, HierModel, Sampler};
use crate::hierarchical::verify::{
    default_drift_grid, default_minorization_grids, default_radius, linspace, verify_drift,
    verify_minorization,
};
use crate::operator::{
    gibbs_step, Permutation, ProjectorMatrix, StepFamily, WeightVector, ALGEBRA_TOL,
};
use crate::report::{csv_table, fmt_f64, to_json, SCHEMA_VERSION};
use crate::spectral::{aperiodicity_check, power_norm_rate, spectral_report, SpectralReport};
use crate::target::{CoordinateSubset, JointTarget};
use crate::theorems::{inheritance_check, solidarity_suite, standard_operators, SolidarityVerdict};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gibbs-spectra", version, about = "Spectral checks for Gibbs samplers on finite product spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum of a cycle or mixture minus the projector onto constants.
    Spectra(SpectraArgs),
    /// Gap agreement across all orderings and sampled mixture weights.
    Solidarity(SolidarityArgs),
    /// Joint versus collapsed operators on a marginal target.
    CollapseCheck(CollapseArgs),
    /// Two-component sampler and its marginal chains.
    TwoComponent(TwoComponentArgs),
    /// Simulate the hierarchical-model samplers.
    Example(ExampleCmd),
    /// Check the drift inequality for the block A `W` chain on a grid.
    VerifyDrift(DriftArgs),
    /// Check the small-set minorization for the block A `W` chain on a grid.
    VerifyMinorization(MinorizationArgs),
    /// Run the regression suite over the built-in targets.
    AllChecks(AllChecksArgs),
    /// Write the built-in regression targets as JSON files.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Cycle,
    Mixture,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target JSON file or `random:K,[sizes],seed`.
    pub target: String,
    /// Steps as `;`-separated coordinate lists, e.g. `0;1,2`. Defaults to single sites.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value_t = Mode::Cycle)]
    pub mode: Mode,
    /// Cycle order as a permutation of step indices, e.g. `2,0,1`.
    #[arg(long)]
    pub order: Option<String>,
    /// Mixture weights, e.g. `0.25,0.75`. Defaults to uniform.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolidarityArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 8)]
    pub weight_samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Retained coordinates `I`, e.g. `1,2`.
    #[arg(long)]
    pub subset: String,
    #[arg(long)]
    pub weights: Option<String>,
    /// Partition `U|V|W` for the blocked-versus-collapsed comparison.
    #[arg(long)]
    pub partition: Option<String>,
}

#[derive(Debug, Args)]
pub struct TwoComponentArgs {
    pub target: String,
    /// Coordinates of the first component; the rest form the second.
    #[arg(long, default_value = "0")]
    pub y: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerChoice {
    #[value(name = "blockA")]
    BlockA,
    #[value(name = "blockB")]
    BlockB,
    Both,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct ExampleCmd {
    #[command(subcommand)]
    pub verify: Option<ExampleVerify>,
    #[command(flatten)]
    pub run: ExampleArgs,
}

#[derive(Debug, Subcommand)]
pub enum ExampleVerify {
    /// Same as the top-level `verify-drift`.
    VerifyDrift(DriftArgs),
    /// Same as the top-level `verify-minorization`.
    VerifyMinorization(MinorizationArgs),
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
    #[arg(long, value_enum, default_value_t = SamplerChoice::Both)]
    pub sampler: SamplerChoice,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV trace path; with `both`, `_blockA`/`_blockB` is added before the extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
    /// Grid size on `[y − 100, y + 100]`.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct MinorizationArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
    /// Small-set radius; defaults to 1.05 times the smallest admissible value.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub w_points: usize,
    #[arg(long, default_value_t = 1000)]
    pub wp_points: usize,
}

#[derive(Debug, Args)]
pub struct AllChecksArgs {
    /// Directory of target JSON files; defaults to the built-in set.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub weight_samples: usize,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command prints and returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<&'a str>,
    passed: bool,
    failures: Vec<String>,
    report: T,
}

fn emit<T: Serialize>(command: &str, seed: u64, target: Option<&str>, failures: Vec<String>, report: T) -> Outcome {
    let passed = failures.is_empty();
    let mut stdout = to_json(&Envelope {
        schema: SCHEMA_VERSION,
        command,
        seed,
        target,
        passed,
        failures,
        report,
    });
    stdout.push('\n');
    Outcome {
        stdout,
        stderr: String::new(),
        exit_code: if passed { EXIT_PASS } else { EXIT_FAIL },
    }
}

fn input_err(e: impl std::fmt::Display) -> Error {
    Error::Input(e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| input_err(format!("bad index {x:?} in {s:?}"))))
        .collect()
}

fn parse_subset(s: &str, k: usize) -> Result<CoordinateSubset> {
    CoordinateSubset::new(parse_list(s)?, k)
}

fn parse_family(spec: Option<&str>, k: usize) -> Result<StepFamily> {
    match spec {
        None => StepFamily::full(k),
        Some(s) => StepFamily::new(s.split(';').map(|b| parse_subset(b, k)).collect::<Result<_>>()?),
    }
}

fn parse_weights(spec: Option<&str>, g: usize) -> Result<WeightVector> {
    match spec {
        None => Ok(WeightVector::uniform(g)),
        Some(s) => WeightVector::new(
            s.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| input_err(format!("bad weight {x:?}"))))
                .collect::<Result<_>>()?,
        ),
    }
}

fn load(spec: &str) -> Result<(TargetFile, Arc<JointTarget>)> {
    let (file, target) = load_target(spec)?;
    Ok((file, Arc::new(target)))
}

#[derive(Serialize)]
struct SpectraReport {
    family: Vec<Vec<usize>>,
    mode: &'static str,
    order: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    spectrum: SpectralReport,
    aperiodic: bool,
    row_sum_deviation: f64,
    stationarity_deviation: f64,
}

fn spectra(a: &SpectraArgs) -> Result<Outcome> {
    let (file, t) = load(&a.target.target)?;
    let fam = parse_family(a.target.family.as_deref(), t.num_coords())?;
    let (op, order, weights) = match a.mode {
        Mode::Cycle => {
            let perm = match &a.order {
                None => Permutation::identity(fam.len()),
                Some(o) => Permutation::new(parse_list(o)?)?,
            };
            (fam.cycle(&t, &perm)?, Some(perm.order().to_vec()), None)
        }
        Mode::Mixture => {
            let w = parse_weights(a.weights.as_deref(), fam.len())?;
            (fam.mixture(&t, &w)?, None, Some(w.as_slice().to_vec()))
        }
    };
    let spectrum = spectral_report(&op)?;
    if a.format == Format::Csv {
        let rows: Vec<Vec<String>> = spectrum
            .eigenvalues
            .iter()
            .map(|e| vec![fmt_f64(e.0), fmt_f64(e.1)])
            .collect();
        return Ok(Outcome {
            stdout: csv_table(&["re", "im"], &rows),
            stderr: String::new(),
            exit_code: EXIT_PASS,
        });
    }
    let inv = op.invariants();
    let mut failures = Vec::new();
    if inv.row_sum > ALGEBRA_TOL {
        failures.push(format!("row sums deviate from 1 by {:e}", inv.row_sum));
    }
    if inv.stationarity > ALGEBRA_TOL {
        failures.push(format!("target is not stationary (deviation {:e})", inv.stationarity));
    }
    let report = SpectraReport {
        family: fam.subsets().iter().map(|s| s.indices().to_vec()).collect(),
        mode: match a.mode {
            Mode::Cycle => "cycle",
            Mode::Mixture => "mixture",
        },
        order,
        weights,
        aperiodic: aperiodicity_check(&op)?,
        spectrum,
        row_sum_deviation: inv.row_sum,
        stationarity_deviation: inv.stationarity,
    };
    Ok(emit("spectra", a.target.seed, Some(&file.name), failures, report))
}

fn solidarity(a: &SolidarityArgs) -> Result<Outcome> {
    let (file, t) = load(&a.target.target)?;
    let fam = parse_family(a.target.family.as_deref(), t.num_coords())?;
    let v: SolidarityVerdict = solidarity_suite(&t, &fam, a.weight_samples, a.target.seed)?;
    if a.format == Format::Csv {
        let mut rows = Vec::new();
        for o in &v.per_ordering_gaps {
            let label = o.order.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
            rows.push(vec!["cycle".into(), label, fmt_f64(o.gap), fmt_f64(o.pi_norm)]);
        }
        for w in &v.per_weight_gaps {
            let label = w.weights.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
            rows.push(vec!["mixture".into(), label, fmt_f64(w.gap), fmt_f64(w.pi_norm)]);
        }
        return Ok(Outcome {
            stdout: csv_table(&["kind", "label", "gap", "pi_norm"], &rows),
            stderr: String::new(),
            exit_code: if v.consistent && v.norm_equivalence { EXIT_PASS } else { EXIT_FAIL },
        });
    }
    let mut failures = Vec::new();
    if !v.consistent {
        failures.push("cycles and mixtures disagree on having a spectral gap".into());
    }
    if !v.norm_equivalence {
        failures.push("norm and spectrum criteria for a gap disagree".into());
    }
    Ok(emit("solidarity", a.target.seed, Some(&file.name), failures, v))
}

#[derive(Serialize)]
struct SimilarityEntry {
    j: Vec<usize>,
    deviation: f64,
    holds: bool,
}

#[derive(Serialize)]
struct CollapseReport {
    subset: Vec<usize>,
    family: Vec<Vec<usize>>,
    similarity: Vec<SimilarityEntry>,
    cycle: SpectrumComparison,
    mixture: SpectrumComparison,
    mixture_real: bool,
    blocked: Option<BlockedVsCollapsed>,
}

fn collapse_check(a: &CollapseArgs) -> Result<Outcome> {
    let (file, t) = load(&a.target.target)?;
    let k = t.num_coords();
    let i = parse_subset(&a.subset, k)?;
    let fam: Vec<CoordinateSubset> = match &a.target.family {
        None => i
            .indices()
            .iter()
            .map(|&c| CoordinateSubset::new(vec![c], k))
            .collect::<Result<_>>()?,
        Some(s) => s.split(';').map(|b| parse_subset(b, k)).collect::<Result<_>>()?,
    };
    let w = parse_weights(a.weights.as_deref(), fam.len())?;
    let mut failures = Vec::new();
    let mut similarity = Vec::new();
    for j in fam.iter().chain(std::iter::once(&i)) {
        let deviation = similarity_deviation(&t, &i, j)?;
        let holds = deviation <= ALGEBRA_TOL;
        if !holds {
            failures.push(format!("intertwining fails for J = {:?}", j.indices()));
        }
        similarity.push(SimilarityEntry {
            j: j.indices().to_vec(),
            deviation,
            holds,
        });
    }
    let c = collapsed_spectral_check(&t, &i, &fam, &CollapseMode::Cycle)?;
    let m = collapsed_spectral_check(&t, &i, &fam, &CollapseMode::Mixture(w))?;
    if !c.spectra.matches {
        failures.push("cycle spectra differ".into());
    }
    if !m.spectra.matches {
        failures.push("mixture spectra differ".into());
    }
    if !m.all_real {
        failures.push("mixture spectrum is not real".into());
    }
    let blocked = match &a.partition {
        None => None,
        Some(p) => {
            let parts: Vec<&str> = p.split('|').collect();
            if parts.len() != 3 {
                return Err(input_err(format!("partition {p:?} needs three parts U|V|W")));
            }
            let (u, v, ww) = (parse_subset(parts[0], k)?, parse_subset(parts[1], k)?, parse_subset(parts[2], k)?);
            let r = blocked_vs_collapsed_check(&t, &u, &v, &ww)?;
            if r.applicable && !r.holds {
                failures.push("blocked and collapsed spectra differ".into());
            }
            Some(r)
        }
    };
    let report = CollapseReport {
        subset: i.indices().to_vec(),
        family: fam.iter().map(|s| s.indices().to_vec()).collect(),
        similarity,
        cycle: c.spectra,
        mixture_real: m.all_real,
        mixture: m.spectra,
        blocked,
    };
    Ok(emit("collapse-check", a.target.seed, Some(&file.name), failures, report))
}

fn two_component_failures(r: &TwoComponentReport) -> Vec<String> {
    let mut f = Vec::new();
    if !r.spectra_agree {
        f.push("the four nonzero spectra differ".into());
    }
    if !r.all_real {
        f.push("spectra are not real".into());
    }
    if !r.self_adjoint_iff_independent {
        f.push("self-adjointness does not match independence".into());
    }
    f
}

fn two_component(a: &TwoComponentArgs) -> Result<Outcome> {
    let (file, t) = load(&a.target)?;
    let y = parse_subset(&a.y, t.num_coords())?;
    let r = two_component_spectral_check(&t, &y)?;
    Ok(emit("two-component", a.seed, Some(&file.name), two_component_failures(&r), r))
}

#[derive(Serialize)]
struct TraceSummary {
    sampler: Sampler,
    steps: usize,
    file: Option<String>,
    mean_rejections: Option<f64>,
    final_state: crate::hierarchical::HierState,
}

#[derive(Serialize)]
struct ExampleReport {
    y: f64,
    traces: Vec<TraceSummary>,
}

fn suffixed(path: &std::path::Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

fn example(a: &ExampleArgs) -> Result<Outcome> {
    let model = HierModel::new(a.y)?;
    let samplers = match a.sampler {
        SamplerChoice::BlockA => vec![Sampler::BlockA],
        SamplerChoice::BlockB => vec![Sampler::BlockB],
        SamplerChoice::Both => vec![Sampler::BlockA, Sampler::BlockB],
    };
    let traces = samplers
        .par_iter()
        .map(|&s| run_chain(&model, s, default_initial(&model), a.steps, a.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    for tr in &traces {
        let file = match &a.out {
            None => None,
            Some(p) => {
                let path = if samplers.len() > 1 { suffixed(p, tr.sampler.name()) } else { p.clone() };
                std::fs::write(&path, tr.to_csv()).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
                Some(path.display().to_string())
            }
        };
        summaries.push(TraceSummary {
            sampler: tr.sampler,
            steps: a.steps,
            file,
            mean_rejections: (!tr.rejection_counts.is_empty()).then(|| {
                tr.rejection_counts.iter().sum::<u64>() as f64 / tr.rejection_counts.len() as f64
            }),
            final_state: *tr.states.last().expect("initial state"),
        });
    }
    Ok(emit("example", a.seed, None, Vec::new(), ExampleReport { y: a.y, traces: summaries }))
}

fn drift(a: &DriftArgs) -> Result<Outcome> {
    let grid = if a.points == 1000 {
        default_drift_grid(a.y)
    } else {
        linspace(a.y - 100.0, a.y + 100.0, a.points)
    };
    let r = verify_drift(a.y, &grid)?;
    let mut failures = Vec::new();
    if !r.lambda_below_bound {
        failures.push(format!("lambda = {} is not below 2^(1/4)", r.lambda));
    }
    if r.min_slack < -crate::hierarchical::verify::DRIFT_SLACK_TOL {
        failures.push(format!("drift inequality fails (min slack {:e})", r.min_slack));
    }
    Ok(emit("verify-drift", 0, None, failures, r))
}

fn minorization(a: &MinorizationArgs) -> Result<Outcome> {
    let d = match a.d {
        Some(d) => d,
        None => default_radius()?,
    };
    let (wg, wpg) = if a.w_points == 201 && a.wp_points == 1000 {
        default_minorization_grids(a.y, d)
    } else {
        let r = d * d;
        (linspace(a.y - r, a.y + r, a.w_points), linspace(a.y - 100.0, a.y + 100.0, a.wp_points))
    };
    let r = verify_minorization(a.y, d, &wg, &wpg)?;
    let mut failures = Vec::new();
    if !r.holds {
        failures.push(format!(
            "k(w, w') >= (1 + d^2)^(-1/2) g(w') fails at {} of {} grid points",
            r.violations, r.grid_points
        ));
    }
    Ok(emit("verify-minorization", 0, None, failures, r))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub target: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn check(target: &str, name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        target: target.into(),
        check: name.into(),
        passed,
        detail,
    }
}

/// Every finite-state check applied to one regression target.
pub fn target_checks(file: &TargetFile, seed: u64, weight_samples: usize) -> Result<Vec<CheckResult>> {
    let t = Arc::new(file.build()?);
    let k = t.num_coords();
    let name = file.name.as_str();
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for mask in 1..(1u32 << k) - 1 {
        let idx: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
        let p = gibbs_step(&t, &CoordinateSubset::new(idx, k)?)?;
        let inv = p.invariants();
        worst = worst
            .max(inv.row_sum)
            .max(inv.stationarity)
            .max(inv.self_adjointness)
            .max(inv.idempotency);
    }
    out.push(check(name, "projection axioms", worst <= ALGEBRA_TOL, format!("max deviation {worst:e}")));

    let ops: Vec<(String, ProjectorMatrix)> = standard_operators(&t)?;
    for (label, q) in &ops {
        let s = spectral_report(q)?;
        out.push(check(name, &format!("gap: {label}"), s.has_gap(), format!("gap {}", fmt_f64(s.gap))));
        let rate = power_norm_rate(q, 50)[49].powf(1.0 / 50.0);
        let dev = (rate - s.spectral_radius).abs();
        out.push(check(name, &format!("radius formula: {label}"), dev <= 0.05, format!("|norm^(1/50) - r| = {dev:e}")));
        out.push(check(name, &format!("aperiodic: {label}"), aperiodicity_check(q)?, String::new()));
    }

    let full = StepFamily::full(k)?;
    let mut families = vec![full];
    if k == 3 {
        families.push(StepFamily::from_indices(&[&[0, 1], &[1, 2]], 3)?);
        families.push(StepFamily::from_indices(&[&[0], &[0, 1], &[2]], 3)?);
    }
    for f in &families {
        let v = solidarity_suite(&t, f, weight_samples, seed)?;
        let label = format!("{:?}", v.family);
        out.push(check(name, &format!("solidarity {label}"), v.consistent && v.norm_equivalence, format!("all gaps: {}", v.all_have_gap)));
    }
    for f in crate::theorems::blocked_families(k)? {
        let r = inheritance_check(&t, &f, weight_samples, seed)?;
        out.push(check(name, &format!("inheritance {:?}", r.family), r.passes, format!("full cycle gap {}", fmt_f64(r.full_cycle_gap))));
    }

    let y = CoordinateSubset::new(vec![0], k)?;
    let r = two_component_spectral_check(&t, &y)?;
    let f = two_component_failures(&r);
    out.push(check(name, "two-component", f.is_empty(), f.join("; ")));

    if k >= 3 {
        let i = CoordinateSubset::new((1..k).collect(), k)?;
        let fam: Vec<CoordinateSubset> = (1..k).map(|c| CoordinateSubset::new(vec![c], k)).collect::<Result<_>>()?;
        let sim = fam
            .iter()
            .map(|j| similarity_deviation(&t, &i, j))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(name, "intertwining", sim <= ALGEBRA_TOL, format!("max deviation {sim:e}")));
        let c = collapsed_spectral_check(&t, &i, &fam, &CollapseMode::Cycle)?;
        out.push(check(name, "collapsed cycle spectra", c.spectra.matches, format!("{:?}", c.spectra.max_deviation)));
        let m = collapsed_spectral_check(&t, &i, &fam, &CollapseMode::Mixture(WeightVector::uniform(fam.len())))?;
        out.push(check(name, "collapsed mixture spectra", m.spectra.matches && m.all_real, format!("{:?}", m.spectra.max_deviation)));
        let s = |c: usize| CoordinateSubset::new(vec![c], k);
        let b = blocked_vs_collapsed_check(&t, &s(0)?, &s(2)?, &CoordinateSubset::new((1..k).filter(|&c| c != 2).collect(), k)?)?;
        if b.applicable {
            out.push(check(name, "blocked vs collapsed", b.holds, String::new()));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AllChecksReport {
    targets: Vec<String>,
    checks: Vec<CheckResult>,
}

fn all_checks(a: &AllChecksArgs) -> Result<Outcome> {
    let files = match &a.fixtures {
        None => builtin_fixtures(),
        Some(dir) => read_fixtures(dir)?,
    };
    if files.is_empty() {
        return Err(input_err("no targets found"));
    }
    let per_target = files
        .par_iter()
        .map(|f| target_checks(f, a.seed, a.weight_samples))
        .collect::<Result<Vec<_>>>()?;
    let checks: Vec<CheckResult> = per_target.into_iter().flatten().collect();
    let failures = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.target, c.check))
        .collect();
    let report = AllChecksReport {
        targets: files.iter().map(|f| f.name.clone()).collect(),
        checks,
    };
    Ok(emit("all-checks", a.seed, None, failures, report))
}

fn fixtures(a: &FixturesArgs) -> Result<Outcome> {
    let written = write_fixtures(&a.out)?;
    Ok(emit("fixtures", 0, None, Vec::new(), written))
}

pub fn run(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Spectra(a) => spectra(a),
        Command::Solidarity(a) => solidarity(a),
        Command::CollapseCheck(a) => collapse_check(a),
        Command::TwoComponent(a) => two_component(a),
        Command::Example(ExampleCmd { verify: Some(ExampleVerify::VerifyDrift(a)), .. }) => drift(a),
        Command::Example(ExampleCmd { verify: Some(ExampleVerify::VerifyMinorization(a)), .. }) => minorization(a),
        Command::Example(ExampleCmd { verify: None, run }) => example(run),
        Command::VerifyDrift(a) => drift(a),
        Command::VerifyMinorization(a) => minorization(a),
        Command::AllChecks(a) => all_checks(a),
        Command::Fixtures(a) => fixtures(a),
    };
    result.unwrap_or_else(|e| Outcome {
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
        exit_code: match e {
            Error::Numerical(_) | Error::EigenFailure(_) => EXIT_FAIL,
            _ => EXIT_INPUT,
        },
    })
}

/// Parses arguments (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let text = e.render().to_string();
            let (stdout, stderr, exit_code) = if e.use_stderr() {
                (String::new(), text, EXIT_INPUT)
            } else {
                (text, String::new(), EXIT_PASS)
            };
            Outcome { stdout, stderr, exit_code }
        }
    }
}
