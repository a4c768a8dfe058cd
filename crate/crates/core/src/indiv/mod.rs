//! Individual average-rate problem: greedy per-state user selection driven by a
//! vector of water levels, with the levels found by monotone fixed-point sweeps.

mod quadrature;

pub use quadrature::{corollary_quadrature, QuadratureResult};

use std::f64::consts::LN_2;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{FadingState, SampleSet};
use crate::costreward::{uniform_kind, Codebook, UserProfile};
use crate::error::{invalid, Error, Result};
use crate::numeric::{mean_and_stderr, par_mean};
use crate::wsum::{Allocation, Share};

/// Relative band for equal quality indicators.
const PHI_TIE: f64 = 1e-12;

/// Minimizer of the per-state Lagrangian of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub rate: f64,
    pub phi: f64,
    /// Selected AMC mode (`0` idle); `None` for unbounded codebooks.
    pub mode: Option<usize>,
    /// The selected AMC mode and the one below it are equally good.
    pub mode_tie: bool,
}

impl Quality {
    const IDLE: Quality = Quality {
        rate: 0.0,
        phi: 0.0,
        mode: None,
        mode_tie: false,
    };
}

/// Per-user data precomputed for fast indicator evaluation.
#[derive(Debug, Clone)]
enum UserModel {
    Infinite {
        mu: f64,
    },
    Amc {
        mu: f64,
        rho: Vec<f64>,
        p: Vec<f64>,
        gamma: Vec<f64>,
    },
}

impl UserModel {
    fn new(profile: &UserProfile) -> Self {
        match &profile.codebook {
            Codebook::Infinite => UserModel::Infinite { mu: profile.mu },
            Codebook::Amc { table } => UserModel::Amc {
                mu: profile.mu,
                rho: table.modes().iter().map(|m| m.rho).collect(),
                p: table.modes().iter().map(|m| m.p).collect(),
                gamma: table.gammas(),
            },
        }
    }

    fn quality(&self, h: f64, lambda: f64) -> Quality {
        match self {
            UserModel::Infinite { mu } => {
                let t = lambda * h / (LN_2 * mu);
                if !(t > 1.0) {
                    return Quality::IDLE;
                }
                Quality {
                    rate: t.log2(),
                    phi: lambda / LN_2 * (1.0 - 1.0 / t - t.ln()),
                    mode: None,
                    mode_tie: false,
                }
            }
            UserModel::Amc { mu, rho, p, gamma } => {
                let mut l = 0;
                while l < gamma.len() && mu * gamma[l] / h <= lambda {
                    l += 1;
                }
                if l == 0 {
                    return Quality {
                        mode: Some(0),
                        ..Quality::IDLE
                    };
                }
                Quality {
                    rate: rho[l - 1],
                    phi: mu * p[l - 1] / h - lambda * rho[l - 1],
                    mode: Some(l),
                    mode_tie: mu * gamma[l - 1] / h == lambda,
                }
            }
        }
    }

    /// Expected rate of a winning user, splitting a mode tie.
    fn served(&self, q: &Quality, tie_share: f64) -> f64 {
        match (self, q.mode) {
            (UserModel::Amc { rho, .. }, Some(l)) if q.mode_tie => {
                let below = if l >= 2 { rho[l - 2] } else { 0.0 };
                tie_share * q.rate + (1.0 - tie_share) * below
            }
            _ => q.rate,
        }
    }

    /// Block power of a winning user given its share of the block.
    fn shares(&self, user: usize, q: &Quality, tau: f64, tie_share: f64) -> Vec<Share> {
        match (self, q.mode) {
            (UserModel::Amc { rho, .. }, Some(l)) if q.mode_tie => {
                let mut v = vec![Share {
                    user,
                    tau: tau * tie_share,
                    rate: q.rate,
                    mode: Some(l),
                }];
                if l >= 2 {
                    v.push(Share {
                        user,
                        tau: tau * (1.0 - tie_share),
                        rate: rho[l - 2],
                        mode: Some(l - 1),
                    });
                }
                v
            }
            _ => vec![Share {
                user,
                tau,
                rate: q.rate,
                mode: q.mode,
            }],
        }
    }

    fn power(&self, h: f64, share: &Share) -> f64 {
        match self {
            UserModel::Infinite { .. } => share.tau * crate::costreward::exp2_m1(share.rate) / h,
            UserModel::Amc { p, .. } => match share.mode {
                Some(l) if l >= 1 => share.tau * p[l - 1] / h,
                _ => 0.0,
            },
        }
    }
}

/// Rate minimizing `μ p(r)/h − λ r` for one user, and the minimum value `φ ≤ 0`.
pub fn quality_indicator(profile: &UserProfile, h: f64, lambda: f64) -> Quality {
    UserModel::new(profile).quality(h, lambda)
}

#[inline]
fn within_band(a: f64, b: f64) -> bool {
    (a - b).abs() <= PHI_TIE * a.abs().max(b.abs())
}

fn greedy_with_models(
    models: &[UserModel],
    state: &FadingState,
    lambda: &[f64],
    tie_share: f64,
) -> (Allocation, bool) {
    let k = models.len();
    let q: Vec<Quality> = models
        .iter()
        .enumerate()
        .map(|(i, m)| m.quality(state.gain(i), lambda[i]))
        .collect();
    let best = q.iter().map(|x| x.phi).fold(0.0, f64::min);
    if !(best < 0.0) {
        return (Allocation::idle(k), false);
    }
    let winners: Vec<usize> = (0..k).filter(|&i| within_band(q[i].phi, best)).collect();
    let tau = 1.0 / winners.len() as f64;
    let shares = winners
        .iter()
        .flat_map(|&i| models[i].shares(i, &q[i], tau, tie_share))
        .collect();
    (
        Allocation::from_shares_unchecked(k, shares),
        winners.len() > 1,
    )
}

/// Greedy allocation: the user with the smallest quality indicator takes the
/// block; equal indicators split it evenly; nobody transmits when all are zero.
pub fn greedy_allocate_state(
    profiles: &[UserProfile],
    state: &FadingState,
    lambda: &[f64],
    tie_share: f64,
) -> Result<Allocation> {
    check_profiles(profiles)?;
    if lambda.len() != profiles.len() || state.users() != profiles.len() {
        return invalid("level vector, state and profiles must have the same length");
    }
    if lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return invalid("water levels must be positive and finite");
    }
    let models: Vec<UserModel> = profiles.iter().map(UserModel::new).collect();
    Ok(greedy_with_models(&models, state, lambda, tie_share).0)
}

fn check_profiles(profiles: &[UserProfile]) -> Result<()> {
    uniform_kind(profiles)?;
    for (k, p) in profiles.iter().enumerate() {
        p.validate()?;
        if p.mu <= 0.0 {
            return invalid(format!(
                "user {k} has a zero cost weight; substitute a small positive weight first"
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Each update sees the latest levels of earlier users.
    GaussSeidel,
    /// Every update in a sweep uses the levels from the start of the sweep.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Per-user single-user levels. Competition only removes service, so the
    /// start has every average rate at or below its target.
    SingleUser,
    /// Single-user levels with the levels of users short of their targets
    /// doubled until every target is met; falls back to `SingleUser` when
    /// that fails.
    Above,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndivOptions {
    /// Relative tolerance on every average rate.
    pub tol: f64,
    pub max_outer: usize,
    pub order: SweepOrder,
    pub init: Init,
    /// Fraction given to the higher mode on an AMC mode tie.
    pub tie_share: f64,
    /// Relative bracket width of each per-user level bisection.
    pub inner_tol: f64,
}

impl Default for IndivOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_outer: 100,
            order: SweepOrder::GaussSeidel,
            init: Init::SingleUser,
            tie_share: 0.5,
            inner_tol: 1e-12,
        }
    }
}

/// Levels and average rates after one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: Vec<f64>,
    pub avg_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndivSolution {
    pub lambda_star: Vec<f64>,
    pub targets: Vec<f64>,
    pub avg_rate: Vec<f64>,
    pub avg_power: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// States where two or more users tie for the block.
    pub ties: usize,
    /// Entry 0 is the initialization, then one record per sweep.
    pub trace: Vec<SweepRecord>,
    pub samples: usize,
    pub seed: u64,
}

/// Sample means with their standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct IndivEvaluation {
    pub rates: Vec<f64>,
    pub rate_stderr: Vec<f64>,
    pub powers: Vec<f64>,
    pub power_stderr: Vec<f64>,
    pub ties: usize,
}

/// Best competing indicator per state (idle counts as zero) and how many
/// competitors attain it.
#[derive(Debug, Clone, Copy)]
struct Floor {
    phi: f64,
    count: usize,
}

pub struct IndivProblem<'a> {
    profiles: Vec<UserProfile>,
    models: Vec<UserModel>,
    sample: &'a SampleSet,
    tie_share: f64,
}

impl<'a> IndivProblem<'a> {
    pub fn new(profiles: &[UserProfile], sample: &'a SampleSet) -> Result<Self> {
        check_profiles(profiles)?;
        if profiles.len() != sample.users() {
            return invalid(format!(
                "{} profiles for a {}-user sample",
                profiles.len(),
                sample.users()
            ));
        }
        Ok(Self {
            profiles: profiles.to_vec(),
            models: profiles.iter().map(UserModel::new).collect(),
            sample,
            tie_share: 0.5,
        })
    }

    pub fn with_tie_share(mut self, tie_share: f64) -> Self {
        self.tie_share = tie_share;
        self
    }

    pub fn users(&self) -> usize {
        self.profiles.len()
    }

    pub fn allocations(&self, lambda: &[f64]) -> Vec<Allocation> {
        self.sample
            .states()
            .par_iter()
            .map(|s| greedy_with_models(&self.models, s, lambda, self.tie_share).0)
            .collect()
    }

    /// Average served rates, powers and their standard errors at `lambda`.
    pub fn evaluate(&self, lambda: &[f64]) -> IndivEvaluation {
        let k = self.users();
        let rows: Vec<(Vec<f64>, bool)> = self
            .sample
            .states()
            .par_iter()
            .map(|s| {
                let (a, tie) = greedy_with_models(&self.models, s, lambda, self.tie_share);
                let mut row = vec![0.0; 2 * k];
                for sh in a.shares() {
                    row[sh.user] += sh.tau * sh.rate;
                    row[k + sh.user] += self.models[sh.user].power(s.gain(sh.user), sh);
                }
                (row, tie)
            })
            .collect();
        let mut out = IndivEvaluation {
            rates: Vec::with_capacity(k),
            rate_stderr: Vec::with_capacity(k),
            powers: Vec::with_capacity(k),
            power_stderr: Vec::with_capacity(k),
            ties: rows.iter().filter(|r| r.1).count(),
        };
        for c in 0..2 * k {
            let col: Vec<f64> = rows.iter().map(|r| r.0[c]).collect();
            let (m, se) = mean_and_stderr(&col);
            if c < k {
                out.rates.push(m);
                out.rate_stderr.push(se);
            } else {
                out.powers.push(m);
                out.power_stderr.push(se);
            }
        }
        out
    }

    pub fn avg_rates(&self, lambda: &[f64]) -> Vec<f64> {
        self.evaluate(lambda).rates
    }

    fn floors(&self, k: usize, lambda: &[f64]) -> Vec<Floor> {
        self.sample
            .states()
            .par_iter()
            .map(|s| {
                let mut f = Floor { phi: 0.0, count: 0 };
                for (i, m) in self.models.iter().enumerate() {
                    if i == k {
                        continue;
                    }
                    let phi = m.quality(s.gain(i), lambda[i]).phi;
                    if phi < 0.0 && within_band(phi, f.phi) {
                        f.count += 1;
                    } else if phi < f.phi {
                        f = Floor { phi, count: 1 };
                    }
                }
                f
            })
            .collect()
    }

    /// `E[τ_k r_k]` as a function of `λ_k` against fixed competitor floors.
    fn component_rate(&self, k: usize, floors: &[Floor], lambda_k: f64) -> f64 {
        let model = &self.models[k];
        let states = self.sample.states();
        let idx: Vec<usize> = (0..states.len()).collect();
        par_mean(&idx, |&i| {
            let q = model.quality(states[i].gain(k), lambda_k);
            if !(q.phi < 0.0) {
                return 0.0;
            }
            let f = floors[i];
            if within_band(q.phi, f.phi) {
                model.served(&q, self.tie_share) / (f.count + 1) as f64
            } else if q.phi < f.phi {
                model.served(&q, self.tie_share)
            } else {
                0.0
            }
        })
    }

    /// Level of user `k` (others fixed) whose average rate meets `target`.
    pub fn update_lambda_component(
        &self,
        k: usize,
        lambda: &[f64],
        target: f64,
        inner_tol: f64,
    ) -> Result<f64> {
        let floors = self.floors(k, lambda);
        self.solve_component(k, &floors, lambda[k], target, inner_tol)
    }

    fn solve_component(
        &self,
        k: usize,
        floors: &[Floor],
        start: f64,
        target: f64,
        inner_tol: f64,
    ) -> Result<f64> {
        if !(target > 0.0) {
            return invalid(format!("rate target must be positive, got {target}"));
        }
        let rate = |l: f64| self.component_rate(k, floors, l);
        // start narrow around the current level and square the ratio on each
        // expansion, so warm starts cost few evaluations
        let mut step = 2f64.powf(0.25);
        let (mut lo, mut hi) = (start / step, start * step);
        let mut guard = 0;
        while rate(lo) > target {
            hi = lo;
            step = (step * step).min(2f64.powi(20));
            lo /= step;
            guard += 1;
            if guard > 60 || lo < 1e-300 {
                return invalid(format!("no positive level of user {k} is small enough"));
            }
        }
        step = 2f64.powf(0.25);
        guard = 0;
        loop {
            let r = rate(hi);
            if r >= target {
                break;
            }
            lo = hi;
            step = (step * step).min(2f64.powi(20));
            hi *= step;
            guard += 1;
            if guard > 60 || hi > 1e300 {
                return Err(Error::Infeasible {
                    target,
                    achievable: r,
                });
            }
        }
        for _ in 0..400 {
            if hi / lo - 1.0 <= inner_tol {
                break;
            }
            let mid = (lo * hi).sqrt();
            if !(mid > lo && mid < hi) {
                break;
            }
            let r = rate(mid);
            if r == target {
                return Ok(mid);
            }
            if r < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }

    /// Levels that serve each user alone at its target.
    pub fn single_user_levels(&self, targets: &[f64], inner_tol: f64) -> Result<Vec<f64>> {
        let none = vec![Floor { phi: 0.0, count: 0 }; self.sample.count()];
        (0..self.users())
            .map(|k| {
                let start = match &self.models[k] {
                    UserModel::Infinite { mu } => LN_2 * mu,
                    UserModel::Amc { mu, gamma, .. } => mu * gamma[0],
                };
                self.solve_component(k, &none, start, targets[k], inner_tol)
            })
            .collect()
    }

    fn initial_levels(&self, targets: &[f64], opts: &IndivOptions) -> Result<Vec<f64>> {
        match &opts.init {
            Init::Explicit(v) => {
                if v.len() != self.users() || v.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return invalid("explicit initial levels must be positive, one per user");
                }
                Ok(v.clone())
            }
            Init::SingleUser => self.single_user_levels(targets, opts.inner_tol),
            Init::Above => {
                // raise only the users still short of their targets; a uniform
                // scale can leave a weak user behind a strong one forever
                let mut lambda = self.single_user_levels(targets, opts.inner_tol)?;
                for _ in 0..200 {
                    let r = self.avg_rates(&lambda);
                    let short: Vec<usize> =
                        (0..lambda.len()).filter(|&k| r[k] < targets[k]).collect();
                    if short.is_empty() {
                        return Ok(lambda);
                    }
                    for k in short {
                        lambda[k] *= 2.0;
                    }
                }
                warn!("could not find levels meeting every target; starting from the single-user levels");
                self.single_user_levels(targets, opts.inner_tol)
            }
        }
    }

    pub fn solve(&self, targets: &[f64], opts: &IndivOptions) -> Result<IndivSolution> {
        let k = self.users();
        if targets.len() != k {
            return invalid(format!("{} targets for {k} users", targets.len()));
        }
        if targets.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return invalid("rate targets must be positive");
        }
        if !(opts.tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        let load: f64 = self
            .profiles
            .iter()
            .zip(targets)
            .filter_map(|(p, t)| p.table().map(|tb| t / tb.max_rate()))
            .sum();
        if load > 1.0 {
            return Err(Error::Infeasible {
                target: load,
                achievable: 1.0,
            });
        }

        let mut lambda = self.initial_levels(targets, opts)?;
        let mut ev = self.evaluate(&lambda);
        let mut trace = vec![SweepRecord {
            lambda: lambda.clone(),
            avg_rate: ev.rates.clone(),
        }];
        let done = |r: &[f64]| {
            r.iter()
                .zip(targets)
                .all(|(r, t)| (r - t).abs() <= opts.tol * t)
        };
        let mut converged = done(&ev.rates);
        let mut sweeps = 0;
        while !converged && sweeps < opts.max_outer {
            let before = lambda.clone();
            match opts.order {
                SweepOrder::GaussSeidel => {
                    for u in 0..k {
                        lambda[u] =
                            self.update_lambda_component(u, &lambda, targets[u], opts.inner_tol)?;
                    }
                }
                SweepOrder::Jacobi => {
                    let old = lambda.clone();
                    lambda = (0..k)
                        .map(|u| self.update_lambda_component(u, &old, targets[u], opts.inner_tol))
                        .collect::<Result<Vec<_>>>()?;
                }
            }
            sweeps += 1;
            ev = self.evaluate(&lambda);
            trace.push(SweepRecord {
                lambda: lambda.clone(),
                avg_rate: ev.rates.clone(),
            });
            // on a finite sample the rates move in steps of single states, so a
            // level vector that no longer moves is accepted as the fixed point
            let stalled = lambda
                .iter()
                .zip(&before)
                .all(|(a, b)| (a - b).abs() <= opts.tol * b);
            converged = done(&ev.rates) || stalled;
        }
        if !converged {
            warn!("level sweeps stopped after {sweeps} sweeps without meeting every target");
        }
        let objective = self
            .profiles
            .iter()
            .zip(&ev.powers)
            .map(|(p, pw)| p.mu * pw)
            .sum();
        Ok(IndivSolution {
            lambda_star: lambda,
            targets: targets.to_vec(),
            avg_rate: ev.rates,
            avg_power: ev.powers,
            objective,
            iterations: sweeps,
            converged,
            ties: ev.ties,
            trace,
            samples: self.sample.count(),
            seed: self.sample.seed(),
        })
    }
}

/// Solves the individual-rate problem on a fixed sample.
pub fn solve(
    profiles: &[UserProfile],
    sample: &SampleSet,
    targets: &[f64],
    opts: &IndivOptions,
) -> Result<IndivSolution> {
    IndivProblem::new(profiles, sample)?
        .with_tie_share(opts.tie_share)
        .solve(targets, opts)
}
