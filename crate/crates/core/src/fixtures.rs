//! Target files, the `random:` target syntax, and the built-in regression targets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::{build_target, JointTarget};

/// On-disk form of a target: alphabet sizes and unnormalized weights in
/// row-major order (coordinate 0 varies slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub name: String,
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl TargetFile {
    pub fn build(&self) -> Result<JointTarget> {
        build_target(&self.sizes, &self.weights)
    }

    pub fn to_json(&self) -> String {
        let mut s = crate::report::to_json(self);
        s.push('\n');
        s
    }
}

pub fn parse_target_json(text: &str) -> Result<TargetFile> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed target JSON: {e}")))
}

/// Weights drawn from Uniform(0.05, 1) by ChaCha8 seeded with `seed`.
pub fn random_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.05..1.0)).collect()
}

pub fn random_target_file(sizes: &[usize], seed: u64) -> TargetFile {
    let n = sizes.iter().product();
    TargetFile {
        name: format!(
            "random:{},[{}],{seed}",
            sizes.len(),
            sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        ),
        sizes: sizes.to_vec(),
        weights: random_weights(n, seed),
    }
}

/// Parses `random:K,[s_1,…,s_K],seed`.
pub fn parse_random_spec(spec: &str) -> Result<TargetFile> {
    let bad = |why: &str| Error::Input(format!("bad random target {spec:?}: {why}"));
    let body = spec.strip_prefix("random:").ok_or_else(|| bad("missing random: prefix"))?;
    let open = body.find('[').ok_or_else(|| bad("missing ["))?;
    let close = body.find(']').ok_or_else(|| bad("missing ]"))?;
    let k: usize = body[..open]
        .trim()
        .trim_end_matches(',')
        .trim()
        .parse()
        .map_err(|_| bad("K is not an integer"))?;
    let sizes = body[open + 1..close]
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| bad("sizes are not integers"))?;
    let seed: u64 = body[close + 1..]
        .trim()
        .trim_start_matches(',')
        .trim()
        .parse()
        .map_err(|_| bad("seed is not an integer"))?;
    if sizes.len() != k {
        return Err(bad(&format!("K = {k} but {} sizes given", sizes.len())));
    }
    Ok(random_target_file(&sizes, seed))
}

/// Loads a target from a JSON file path or a `random:` spec.
pub fn load_target(spec: &str) -> Result<(TargetFile, JointTarget)> {
    let file = if spec.starts_with("random:") {
        parse_random_spec(spec)?
    } else {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| Error::Input(format!("cannot read target file {spec}: {e}")))?;
        parse_target_json(&text)?
    };
    let target = file
        .build()
        .map_err(|e| Error::Input(format!("target {:?}: {e}", file.name)))?;
    Ok((file, target))
}

pub fn uniform_fixture() -> TargetFile {
    TargetFile {
        name: "uniform".into(),
        sizes: vec![2, 2, 2],
        weights: vec![1.0; 8],
    }
}

/// Two binary coordinates with correlation `ρ`: weights `(1 ± ρ)/4`.
pub fn correlated_fixture(rho: f64) -> TargetFile {
    let (a, b) = ((1.0 + rho) / 4.0, (1.0 - rho) / 4.0);
    TargetFile {
        name: format!("correlated_{rho}"),
        sizes: vec![2, 2],
        weights: vec![a, b, b, a],
    }
}

/// Coordinates `(U, W, V)` with `U ⊥ V | W`.
pub fn markov_fixture() -> TargetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0.2..1.0)).collect() };
    let (pw, pu, pv) = (draw(2), draw(4), draw(4));
    let weights = (0..8)
        .map(|x| {
            let (u, w, v) = (x / 4, (x / 2) % 2, x % 2);
            pw[w] * pu[2 * w + u] * pv[2 * w + v]
        })
        .collect();
    TargetFile {
        name: "markov_uwv".into(),
        sizes: vec![2, 2, 2],
        weights,
    }
}

/// The `i`-th seeded random fixture: `K = 2 + i mod 3`, sizes in `{2, 3}`.
pub fn random_fixture(i: u64) -> TargetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let k = 2 + (i % 3) as usize;
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=3)).collect();
    let mut f = random_target_file(&sizes, 5000 + i);
    f.name = format!("random_{i:02}");
    f
}

pub const CORRELATIONS: [f64; 3] = [0.25, 0.5, 0.9];
pub const RANDOM_FIXTURES: u64 = 20;

pub fn builtin_fixtures() -> Vec<TargetFile> {
    let mut v = vec![uniform_fixture()];
    v.extend(CORRELATIONS.iter().map(|&r| correlated_fixture(r)));
    v.push(markov_fixture());
    v.extend((0..RANDOM_FIXTURES).map(random_fixture));
    v
}

pub fn write_fixtures(dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
    builtin_fixtures()
        .iter()
        .map(|f| {
            let name = format!("{}.json", f.name);
            std::fs::write(dir.join(&name), f.to_json())
                .map_err(|e| Error::Input(format!("{name}: {e}")))?;
            Ok(name)
        })
        .collect()
}

/// Reads every `*.json` target in `dir`, sorted by file name.
pub fn read_fixtures(dir: &Path) -> Result<Vec<TargetFile>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
            parse_target_json(&text)
        })
        .collect()
}
