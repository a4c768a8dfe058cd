//! Block-fading channel models, seeded state sampling and empirical expectations.
//!
//! Gains are channel *power* gains normalized by the noise power (σ² = 1, B = 1).
//! Rayleigh fading therefore draws exponentially distributed power gains.
//!
//! # Random streams
//!
//! Every user owns an independent stream of a ChaCha20 generator
//! (`rand_chacha` 0.9): the generator is seeded with `seed_from_u64(seed)` and
//! user `k` selects stream `k` via `set_stream(k)`. State `i` consumes the
//! `i`-th draw(s) of each user's stream, so adding users or states never
//! perturbs the draws of existing ones.

use std::io::Write;

use rand::distr::{Distribution, Open01, StandardUniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::par_mean;

/// Joint fading state of one block: one noise-normalized power gain per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FadingState {
    gains: Vec<f64>,
}

impl FadingState {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::Empty("fading state"));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return invalid(format!("channel gain must be positive and finite, got {g}"));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, user: usize) -> f64 {
        self.gains[user]
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }
}

/// Marginal distribution of one user's power gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fading {
    /// Rayleigh amplitude, i.e. exponentially distributed power with this mean.
    RayleighPower {
        mean_gain: f64,
    },
    /// Finite support: `(gain, probability)` atoms.
    Discrete {
        points: Vec<(f64, f64)>,
    },
    Constant {
        gain: f64,
    },
}

impl Fading {
    pub fn validate(&self) -> Result<()> {
        match self {
            Fading::RayleighPower { mean_gain } => {
                if !(mean_gain.is_finite() && *mean_gain > 0.0) {
                    return invalid(format!(
                        "Rayleigh mean gain must be positive, got {mean_gain}"
                    ));
                }
            }
            Fading::Constant { gain } => {
                if !(gain.is_finite() && *gain > 0.0) {
                    return invalid(format!("constant gain must be positive, got {gain}"));
                }
            }
            Fading::Discrete { points } => {
                if points.is_empty() {
                    return Err(Error::Empty("discrete fading support"));
                }
                let mut total = 0.0;
                for &(g, p) in points {
                    if !(g.is_finite() && g > 0.0) {
                        return invalid(format!("discrete gain must be positive, got {g}"));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return invalid(format!("probability out of range: {p}"));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return invalid(format!("discrete probabilities sum to {total}, expected 1"));
                }
            }
        }
        Ok(())
    }

    /// Mean power gain.
    pub fn mean(&self) -> f64 {
        match self {
            Fading::RayleighPower { mean_gain } => *mean_gain,
            Fading::Constant { gain } => *gain,
            Fading::Discrete { points } => points.iter().map(|(g, p)| g * p).sum(),
        }
    }

    /// Closed-form cdf where one exists (Rayleigh power only).
    pub fn cdf(&self, z: f64) -> Option<f64> {
        match self {
            Fading::RayleighPower { mean_gain } => rayleigh_cdf(*mean_gain, z).ok(),
            _ => None,
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> f64 {
        match self {
            Fading::RayleighPower { mean_gain } => {
                let u: f64 = Open01.sample(rng);
                -mean_gain * u.ln()
            }
            Fading::Constant { gain } => *gain,
            Fading::Discrete { points } => {
                let u: f64 = StandardUniform.sample(rng);
                let mut acc = 0.0;
                for &(g, p) in points {
                    acc += p;
                    if u < acc {
                        return g;
                    }
                }
                points[points.len() - 1].0
            }
        }
    }
}

/// Independent-across-users fading model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    users: Vec<Fading>,
}

impl ChannelModel {
    pub fn new(users: Vec<Fading>) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Empty("channel model users"));
        }
        for u in &users {
            u.validate()?;
        }
        Ok(Self { users })
    }

    /// `count` users with the same marginal.
    pub fn iid(fading: Fading, count: usize) -> Result<Self> {
        Self::new(vec![fading; count])
    }

    pub fn rayleigh(mean_gains: &[f64]) -> Result<Self> {
        Self::new(
            mean_gains
                .iter()
                .map(|&m| Fading::RayleighPower { mean_gain: m })
                .collect(),
        )
    }

    pub fn users(&self) -> &[Fading] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// A fixed, immutable set of fading states shared by all evaluations of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    states: Vec<FadingState>,
    seed: u64,
}

impl SampleSet {
    /// Wraps explicit states (all must have the same user count).
    pub fn from_states(states: Vec<FadingState>, seed: u64) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("sample set"))?;
        let k = first.users();
        if states.iter().any(|s| s.users() != k) {
            return invalid("all fading states must have the same number of users");
        }
        Ok(Self { states, seed })
    }

    pub fn states(&self) -> &[FadingState] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.states.len()
    }

    pub fn users(&self) -> usize {
        self.states[0].users()
    }

    /// One row per state, one column per user gain.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.users()).map(|k| format!("h{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for s in &self.states {
            let row: Vec<String> = s.gains().iter().map(|g| format!("{g:.17e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Draws `count` i.i.d. block states from `model`.
pub fn sample_states(model: &ChannelModel, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return invalid("sample count must be at least 1");
    }
    for u in model.users() {
        u.validate()?;
    }
    let columns: Vec<Vec<f64>> = model
        .users()
        .iter()
        .enumerate()
        .map(|(k, fading)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..count).map(|_| fading.draw(&mut rng)).collect()
        })
        .collect();
    let states = (0..count)
        .map(|i| FadingState {
            gains: columns.iter().map(|c| c[i]).collect(),
        })
        .collect();
    Ok(SampleSet { states, seed })
}

/// Empirical expectation of `f` over the sample.
pub fn expect<F>(sample: &SampleSet, f: F) -> Result<f64>
where
    F: Fn(&FadingState) -> f64 + Sync + Send,
{
    if sample.states.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    Ok(par_mean(&sample.states, f))
}

/// cdf of an exponentially distributed power gain with the given mean.
pub fn rayleigh_cdf(mean_gain: f64, z: f64) -> Result<f64> {
    if !(mean_gain.is_finite() && mean_gain > 0.0) {
        return invalid(format!(
            "Rayleigh mean gain must be positive, got {mean_gain}"
        ));
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    Ok((-(-z / mean_gain).exp_m1()).clamp(0.0, 1.0))
}
