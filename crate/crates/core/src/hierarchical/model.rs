//! The model `Y = W + N₁/√U`, `W = V + N₂` with one observation `y`, and the
//! two blocked Gibbs samplers for its posterior.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Cap on proposals per `W` draw in block B.
pub const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HierModel {
    pub y: f64,
}

impl Default for HierModel {
    fn default() -> Self {
        Self { y: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HierState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl HierState {
    pub fn new(u: f64, v: f64, w: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) || !v.is_finite() || !w.is_finite() {
            return Err(Error::Precondition(format!("invalid state ({u}, {v}, {w})")));
        }
        Ok(Self { u, v, w })
    }
}

/// Full conditional laws at a state. Normal laws are `(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditionals {
    /// `U | w` is exponential with this rate.
    pub u_rate: f64,
    pub w_given_u: (f64, f64),
    pub v_given_w: (f64, f64),
}

impl HierModel {
    pub fn new(y: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::Precondition("y must be finite".into()));
        }
        Ok(Self { y })
    }

    pub fn u_rate(&self, w: f64) -> f64 {
        (1.0 + (self.y - w).powi(2)) / 2.0
    }

    pub fn conditionals(&self, state: &HierState) -> Result<Conditionals> {
        if !(state.u > 0.0) {
            return Err(Error::Precondition(format!("u = {} is not positive", state.u)));
        }
        Ok(Conditionals {
            u_rate: self.u_rate(state.w),
            w_given_u: (self.y, 1.0 / state.u),
            v_given_w: (state.w, 1.0),
        })
    }

    /// Unnormalized density of `W | v`: `exp(−(w−v)²/2) / (1 + (y−w)²)`.
    pub fn w_given_v_density(&self, w: f64, v: f64) -> f64 {
        (-(w - v).powi(2) / 2.0).exp() * self.acceptance_probability(w)
    }

    /// Acceptance probability of a `N(v, 1)` proposal `w` in block B.
    pub fn acceptance_probability(&self, w: f64) -> f64 {
        1.0 / (1.0 + (self.y - w).powi(2))
    }

    fn draw_u<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> f64 {
        Exp::new(self.u_rate(w)).expect("positive rate").sample(rng)
    }

    /// Block A: `u′ ~ π(u | w)`, then `(v′, w′) ~ π(v, w | u′)` drawn as
    /// `w′ ~ N(y, 1/u′)`, `v′ ~ N(w′, 1)`.
    pub fn step_block_a<R: Rng + ?Sized>(&self, s: &HierState, rng: &mut R) -> HierState {
        let u = self.draw_u(s.w, rng);
        let w = Normal::new(self.y, 1.0 / u.sqrt()).expect("finite sd").sample(rng);
        let v = Normal::new(w, 1.0).expect("unit sd").sample(rng);
        HierState { u, v, w }
    }

    /// Block B: `v′ ~ N(w, 1)`, then `(u′, w′) ~ π(u, w | v′)` with `w′` by
    /// rejection from `N(v′, 1)` and `u′ ~ π(u | w′)`. Also returns the
    /// number of rejected proposals.
    pub fn step_block_b<R: Rng + ?Sized>(&self, s: &HierState, rng: &mut R) -> Result<(HierState, u64)> {
        self.step_block_b_traced(s, rng, |_, _| {})
    }

    /// [`Self::step_block_b`], reporting every proposal and whether it was accepted.
    pub fn step_block_b_traced<R, F>(&self, s: &HierState, rng: &mut R, mut on_proposal: F) -> Result<(HierState, u64)>
    where
        R: Rng + ?Sized,
        F: FnMut(f64, bool),
    {
        let v = Normal::new(s.w, 1.0).expect("unit sd").sample(rng);
        let proposal = Normal::new(v, 1.0).expect("unit sd");
        let mut rejections = 0;
        let w = loop {
            let w: f64 = proposal.sample(rng);
            let accept = rng.random::<f64>() < self.acceptance_probability(w);
            on_proposal(w, accept);
            if accept {
                break w;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::Numerical(format!(
                    "rejection sampler exceeded {MAX_REJECTIONS} proposals at v = {v}"
                )));
            }
        };
        let u = self.draw_u(w, rng);
        Ok((HierState { u, v, w }, rejections))
    }

    /// Exact draw of `W | v` by rejection from a Gaussian envelope at the
    /// mode. With `s = w − y`, the log density `−(s − m)²/2 − ln(1 + s²)` has
    /// second derivative in `[−3, −3/4]`, so its tangent parabola with
    /// curvature `3/4` dominates it and accepts at least half the proposals.
    pub fn draw_w_given_v_envelope<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        const KAPPA: f64 = 0.75;
        let m = v - self.y;
        let h = |s: f64| -(s - m).powi(2) / 2.0 - (1.0 + s * s).ln();
        let dh = |s: f64| (m - s) - 2.0 * s / (1.0 + s * s);
        // dh is decreasing with dh(0) = m and dh(m) of the opposite sign
        let (mut lo, mut hi) = if m >= 0.0 { (0.0, m) } else { (m, 0.0) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if dh(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s0 = 0.5 * (lo + hi);
        let (h0, g0) = (h(s0), dh(s0));
        let mu = s0 + g0 / KAPPA;
        let env = Normal::new(mu, 1.0 / KAPPA.sqrt()).expect("finite mean");
        loop {
            let s: f64 = env.sample(rng);
            let log_env = h0 + g0 * (s - s0) - KAPPA / 2.0 * (s - s0).powi(2);
            if rng.random::<f64>().ln() < h(s) - log_env {
                return self.y + s;
            }
        }
    }

    /// Block B with at most `max_proposals` plain rejection proposals before
    /// the `W` draw switches to [`Self::draw_w_given_v_envelope`]. Still
    /// exact: an accepted proposal is a target draw whatever the attempt
    /// count. Also returns whether the fallback was used.
    pub fn step_block_b_hybrid<R: Rng + ?Sized>(&self, s: &HierState, rng: &mut R, max_proposals: u64) -> (HierState, bool) {
        let v = Normal::new(s.w, 1.0).expect("unit sd").sample(rng);
        let proposal = Normal::new(v, 1.0).expect("unit sd");
        let mut w = None;
        for _ in 0..max_proposals {
            let c: f64 = proposal.sample(rng);
            if rng.random::<f64>() < self.acceptance_probability(c) {
                w = Some(c);
                break;
            }
        }
        let fallback = w.is_none();
        let w = w.unwrap_or_else(|| self.draw_w_given_v_envelope(v, rng));
        let u = self.draw_u(w, rng);
        (HierState { u, v, w }, fallback)
    }

    /// An exact posterior draw: `W` from its Cauchy(`y`, 1) marginal by
    /// inverse CDF, then `V | w` and `U | w`.
    pub fn posterior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HierState {
        let p: f64 = rng.random();
        let w = self.y + (std::f64::consts::PI * (p - 0.5)).tan();
        let v = Normal::new(w, 1.0).expect("unit sd").sample(rng);
        let u = self.draw_u(w, rng);
        HierState { u, v, w }
    }

    pub fn step<R: Rng + ?Sized>(&self, sampler: Sampler, s: &HierState, rng: &mut R) -> Result<(HierState, u64)> {
        match sampler {
            Sampler::BlockA => Ok((self.step_block_a(s, rng), 0)),
            Sampler::BlockB => self.step_block_b(s, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sampler {
    /// Update `U`, then `(V, W)` jointly.
    #[serde(rename = "blockA")]
    BlockA,
    /// Update `V`, then `(U, W)` jointly.
    #[serde(rename = "blockB")]
    BlockB,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::BlockA => "blockA",
            Sampler::BlockB => "blockB",
        }
    }

    /// Stream index used for this sampler's chain in paired runs.
    pub fn stream(self) -> u64 {
        match self {
            Sampler::BlockA => 0,
            Sampler::BlockB => 1,
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blockA" => Ok(Sampler::BlockA),
            "blockB" => Ok(Sampler::BlockB),
            _ => Err(Error::Precondition(format!("unknown sampler {s:?}"))),
        }
    }
}

/// RNG for chain `stream` under a root seed: ChaCha8 keyed by the seed, one
/// stream per chain.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainTrace {
    pub sampler: Sampler,
    pub seed: u64,
    /// `states[0]` is the initial state.
    pub states: Vec<HierState>,
    /// Rejections per step (block B only; empty for block A).
    pub rejection_counts: Vec<u64>,
}

impl ChainTrace {
    pub fn w(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.w).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,u,v,w\n");
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                crate::report::fmt_f64(s.u),
                crate::report::fmt_f64(s.v),
                crate::report::fmt_f64(s.w)
            ));
        }
        out
    }
}

/// Runs `steps` transitions from `initial` on the sampler's own stream of `seed`.
pub fn run_chain(model: &HierModel, sampler: Sampler, initial: HierState, steps: usize, seed: u64) -> Result<ChainTrace> {
    let mut rng = chain_rng(seed, sampler.stream());
    let mut states = Vec::with_capacity(steps + 1);
    let mut rejection_counts = Vec::new();
    states.push(initial);
    let mut s = initial;
    for _ in 0..steps {
        let (next, rej) = model.step(sampler, &s, &mut rng)?;
        if sampler == Sampler::BlockB {
            rejection_counts.push(rej);
        }
        states.push(next);
        s = next;
    }
    Ok(ChainTrace {
        sampler,
        seed,
        states,
        rejection_counts,
    })
}

/// Default starting point `(u, v, w) = (1, y, y)`.
pub fn default_initial(model: &HierModel) -> HierState {
    HierState {
        u: 1.0,
        v: model.y,
        w: model.y,
    }
}
