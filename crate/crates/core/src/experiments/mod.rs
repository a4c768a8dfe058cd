//! Power-region tracing, baseline comparisons, frequency-selective allocation
//! and slot quantization.

mod baseline;
mod quantize;

use std::io::Write;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{policy_a, policy_b};
pub use quantize::quantize_time;

use crate::channel::{FadingState, SampleSet};
use crate::costreward::UserProfile;
use crate::error::{invalid, Error, Result};
use crate::indiv::{IndivOptions, IndivProblem, IndivSolution, Init};
use crate::wsum::{WsumOptions, WsumProblem, WsumSolution};

/// End guard keeping swept cost weights away from zero.
pub const DIRECTION_GUARD: f64 = 1e-3;
pub const DEFAULT_DIRECTIONS: usize = 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `Σ_k w_k E[τ_k r_k] ≥ rate`, with the weights taken from the profiles.
    WeightedSum {
        rate: f64,
    },
    Individual {
        rates: Vec<f64>,
    },
}

impl Constraint {
    pub fn validate(&self, users: usize) -> Result<()> {
        match self {
            Constraint::WeightedSum { rate } if !(*rate > 0.0 && rate.is_finite()) => {
                invalid(format!("weighted-sum rate must be positive, got {rate}"))
            }
            Constraint::Individual { rates } if rates.len() != users => invalid(format!(
                "{} individual rates for {users} users",
                rates.len()
            )),
            Constraint::Individual { rates }
                if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) =>
            {
                invalid("individual rates must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Per-user targets for the equal-time baselines. A weighted-sum rate is
    /// split so that every user contributes the same weighted share.
    pub fn baseline_targets(&self, profiles: &[UserProfile]) -> Vec<f64> {
        match self {
            Constraint::WeightedSum { rate } => {
                let k = profiles.len() as f64;
                profiles.iter().map(|p| rate / (k * p.w)).collect()
            }
            Constraint::Individual { rates } => rates.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Optimal,
    PolicyA,
    PolicyB,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub wsum: WsumOptions,
    pub indiv: IndivOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solution {
    WeightedSum(WsumSolution),
    Individual(IndivSolution),
}

impl Solution {
    pub fn avg_power(&self) -> &[f64] {
        match self {
            Solution::WeightedSum(s) => &s.avg_power,
            Solution::Individual(s) => &s.avg_power,
        }
    }

    /// `E[τ_k r_k]` per user.
    pub fn user_rates(&self) -> &[f64] {
        match self {
            Solution::WeightedSum(s) => &s.user_rates,
            Solution::Individual(s) => &s.avg_rate,
        }
    }

    pub fn objective(&self) -> f64 {
        match self {
            Solution::WeightedSum(s) => s.objective,
            Solution::Individual(s) => s.objective,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Solution::WeightedSum(_) => true,
            Solution::Individual(s) => s.converged,
        }
    }
}

pub fn solve_constraint(
    profiles: &[UserProfile],
    sample: &SampleSet,
    constraint: &Constraint,
    opts: &SolverOptions,
) -> Result<Solution> {
    constraint.validate(profiles.len())?;
    match constraint {
        Constraint::WeightedSum { rate } => Ok(Solution::WeightedSum(
            WsumProblem::new(profiles, sample)?.solve(*rate, &opts.wsum)?,
        )),
        Constraint::Individual { rates } => Ok(Solution::Individual(
            IndivProblem::new(profiles, sample)?
                .with_tie_share(opts.indiv.tie_share)
                .solve(rates, &opts.indiv)?,
        )),
    }
}

/// Solves one problem per cost-weight vector in `mus`.
///
/// Weighted-sum problems run in parallel. Individual problems run in order and
/// start each solve from the previous levels rescaled by the change in cost
/// weight, unless the options fix an explicit start.
pub fn solve_directions(
    profiles: &[UserProfile],
    sample: &SampleSet,
    constraint: &Constraint,
    mus: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<Solution>> {
    constraint.validate(profiles.len())?;
    if mus.iter().any(|m| m.len() != profiles.len()) {
        return invalid("every cost-weight vector needs one entry per user");
    }
    let weighted = |mu: &[f64]| -> Vec<UserProfile> {
        profiles
            .iter()
            .zip(mu)
            .map(|(p, &m)| p.with_mu(m))
            .collect()
    };
    match constraint {
        Constraint::WeightedSum { .. } => mus
            .par_iter()
            .map(|mu| solve_constraint(&weighted(mu), sample, constraint, opts))
            .collect(),
        Constraint::Individual { .. } => {
            let mut out: Vec<Solution> = Vec::with_capacity(mus.len());
            let mut prev: Option<(&Vec<f64>, Vec<f64>)> = None;
            for mu in mus {
                let mut o = opts.clone();
                if let (Some((pmu, plambda)), false) =
                    (&prev, matches!(opts.indiv.init, Init::Explicit(_)))
                {
                    let start = plambda
                        .iter()
                        .zip(mu.iter().zip(pmu.iter()))
                        .map(|(l, (m, pm))| l * m / pm)
                        .collect();
                    o.indiv.init = Init::Explicit(start);
                }
                let sol = solve_constraint(&weighted(mu), sample, constraint, &o)?;
                if let Solution::Individual(s) = &sol {
                    debug!("direction {mu:?}: {} sweeps", s.iterations);
                    prev = Some((mu, s.lambda_star.clone()));
                }
                out.push(sol);
            }
            Ok(out)
        }
    }
}

/// Cosine-spaced weights `t_i ∈ [ε, 1−ε]`, denser near both ends.
pub fn direction_grid(directions: usize) -> Result<Vec<f64>> {
    if directions < 2 {
        return invalid(format!("need at least two directions, got {directions}"));
    }
    let n = (directions - 1) as f64;
    Ok((0..directions)
        .map(|i| {
            let c = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n).cos());
            DIRECTION_GUARD + (1.0 - 2.0 * DIRECTION_GUARD) * c
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub mu: Vec<f64>,
    pub pbar: Vec<f64>,
    pub achieved_rates: Vec<f64>,
}

impl RegionPoint {
    pub fn objective(&self) -> f64 {
        self.mu.iter().zip(&self.pbar).map(|(m, p)| m * p).sum()
    }
}

/// Lower boundary of the two-user power region, one point per direction
/// `μ = (t, 1−t)`, sorted by the first user's power.
pub fn trace_region(
    profiles: &[UserProfile],
    sample: &SampleSet,
    constraint: &Constraint,
    directions: usize,
    opts: &SolverOptions,
) -> Result<Vec<RegionPoint>> {
    if profiles.len() != 2 {
        return Err(Error::Unsupported(format!(
            "region tracing needs two users, got {}",
            profiles.len()
        )));
    }
    let mus: Vec<Vec<f64>> = direction_grid(directions)?
        .into_iter()
        .map(|t| vec![t, 1.0 - t])
        .collect();
    let sols = solve_directions(profiles, sample, constraint, &mus, opts)?;
    let mut points: Vec<RegionPoint> = mus
        .into_iter()
        .zip(sols)
        .map(|(mu, s)| RegionPoint {
            mu,
            pbar: s.avg_power().to_vec(),
            achieved_rates: s.user_rates().to_vec(),
        })
        .collect();
    points.sort_by(|a, b| {
        a.pbar[0]
            .total_cmp(&b.pbar[0])
            .then(b.pbar[1].total_cmp(&a.pbar[1]))
    });
    Ok(points)
}

/// Largest violation of lower-left convexity along a trace sorted by `P̄₁`,
/// as a fraction of the trace's power scale. Zero for a convex trace.
pub fn convexity_violation(points: &[RegionPoint]) -> f64 {
    let scale = points
        .iter()
        .flat_map(|p| p.pbar.iter().copied())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    points
        .windows(3)
        .map(|w| {
            let (a, b, c) = (&w[0].pbar, &w[1].pbar, &w[2].pbar);
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            (-cross / (scale * scale)).max(0.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsRow {
    /// `μ₁/μ₂`.
    pub ratio: f64,
    pub mu: Vec<f64>,
    /// Weighted objectives `μᵀp̄` of each policy.
    pub optimal: f64,
    pub policy_a: f64,
    pub policy_b: f64,
    pub db_vs_a: f64,
    pub db_vs_b: f64,
}

/// Savings of the optimal policy over both baselines, in dB of `μᵀp̄`, for
/// each cost-weight ratio `μ₁/μ₂` (weights normalized to sum to one).
pub fn power_savings(
    profiles: &[UserProfile],
    sample: &SampleSet,
    constraint: &Constraint,
    ratios: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SavingsRow>> {
    if profiles.len() != 2 {
        return Err(Error::Unsupported(format!(
            "savings tables need two users, got {}",
            profiles.len()
        )));
    }
    if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return invalid("cost-weight ratios must be positive");
    }
    constraint.validate(2)?;
    let targets = constraint.baseline_targets(profiles);
    let pa = policy_a(profiles, sample, &targets)?;
    let pb = policy_b(profiles, sample, &targets)?;
    let mus: Vec<Vec<f64>> = ratios
        .iter()
        .map(|r| vec![r / (1.0 + r), 1.0 / (1.0 + r)])
        .collect();
    let sols = solve_directions(profiles, sample, constraint, &mus, opts)?;
    let dot = |mu: &[f64], p: &[f64]| mu.iter().zip(p).map(|(m, p)| m * p).sum::<f64>();
    Ok(ratios
        .iter()
        .zip(mus)
        .zip(sols)
        .map(|((&ratio, mu), s)| {
            let optimal = dot(&mu, s.avg_power());
            let a = dot(&mu, &pa);
            let b = dot(&mu, &pb);
            SavingsRow {
                ratio,
                optimal,
                policy_a: a,
                policy_b: b,
                db_vs_a: 10.0 * (a / optimal).log10(),
                db_vs_b: 10.0 * (b / optimal).log10(),
                mu,
            }
        })
        .collect())
}

/// Solves over a frequency-selective channel given per-state gain grids
/// (`spectra[state][bin]`) on a uniform bin grid. Each (state, bin) pair is
/// treated as one fading realization of equal weight.
pub fn allocate_freq_selective(
    profiles: &[UserProfile],
    spectra: &[Vec<FadingState>],
    constraint: &Constraint,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Solution> {
    let bins = spectra
        .first()
        .map(Vec::len)
        .ok_or(Error::Empty("spectra"))?;
    if bins == 0 || spectra.iter().any(|s| s.len() != bins) {
        return invalid("every state needs the same positive number of frequency bins");
    }
    let flat: Vec<FadingState> = spectra.iter().flatten().cloned().collect();
    let sample = SampleSet::from_states(flat, seed)?;
    solve_constraint(profiles, &sample, constraint, opts)
}

fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.11e}");
    // re-parse to drop trailing zeros while keeping 12 significant digits
    let v: f64 = s.parse().unwrap_or(x);
    format!("{v}")
}

/// Region trace as CSV `mu1,mu2,p1,p2,r1,r2`.
pub fn write_region_csv<W: Write>(points: &[RegionPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "mu1,mu2,p1,p2,r1,r2")?;
    for p in points {
        let cells: Vec<String> =
            p.mu.iter()
                .chain(&p.pbar)
                .chain(&p.achieved_rates)
                .map(|v| sig12(*v))
                .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Savings table as CSV `ratio,dB_vs_A,dB_vs_B`.
pub fn write_savings_csv<W: Write>(rows: &[SavingsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ratio,dB_vs_A,dB_vs_B")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            sig12(r.ratio),
            sig12(r.db_vs_a),
            sig12(r.db_vs_b)
        )?;
    }
    Ok(())
}
