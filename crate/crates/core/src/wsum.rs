//! Weighted sum average-rate problem: per-state water-filling on the envelope
//! and a bisection on the common water level.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{FadingState, SampleSet};
use crate::costreward::{
    build_envelope, exp2_m1, Envelope, LevelPoint, OperatingPoint, UserProfile,
};
use crate::error::{invalid, Error, Result};
use crate::numeric::{par_mean, par_mean_rows};

/// A slice of the block given to one user at one rate (and, with AMC, one mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub user: usize,
    pub tau: f64,
    pub rate: f64,
    pub mode: Option<usize>,
}

/// Time and rate allocation of one block. Unassigned time is idle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    users: usize,
    shares: Vec<Share>,
}

impl Allocation {
    pub fn idle(users: usize) -> Self {
        Self {
            users,
            shares: Vec::new(),
        }
    }

    /// Validates fractions and drops empty shares.
    pub fn new(users: usize, shares: Vec<Share>) -> Result<Self> {
        let mut kept = Vec::with_capacity(shares.len());
        let mut total = 0.0;
        for s in shares {
            if s.user >= users {
                return invalid(format!("share for unknown user {}", s.user));
            }
            if !(s.tau >= 0.0 && s.tau.is_finite()) || !(s.rate >= 0.0 && s.rate.is_finite()) {
                return invalid(format!("invalid share {s:?}"));
            }
            total += s.tau;
            if s.tau > 0.0 && s.rate > 0.0 {
                kept.push(s);
            }
        }
        if total > 1.0 + 1e-12 {
            return invalid(format!("time fractions sum to {total}"));
        }
        Ok(Self {
            users,
            shares: kept,
        })
    }

    pub(crate) fn from_shares_unchecked(users: usize, shares: Vec<Share>) -> Self {
        Self {
            users,
            shares: shares
                .into_iter()
                .filter(|s| s.tau > 0.0 && s.rate > 0.0)
                .collect(),
        }
    }

    pub fn shares(&self) -> &[Share] {
        &self.shares
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn is_idle(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.shares.iter().map(|s| s.tau).sum()
    }

    pub fn tau(&self, user: usize) -> f64 {
        self.shares
            .iter()
            .filter(|s| s.user == user)
            .map(|s| s.tau)
            .sum()
    }

    /// `τ_k r_k` summed over the user's shares.
    pub fn served_rate(&self, user: usize) -> f64 {
        self.shares
            .iter()
            .filter(|s| s.user == user)
            .map(|s| s.tau * s.rate)
            .sum()
    }

    pub fn weighted_rate(&self, profiles: &[UserProfile]) -> f64 {
        self.shares
            .iter()
            .map(|s| profiles[s.user].w * s.tau * s.rate)
            .sum()
    }

    /// Number of distinct users with positive time.
    pub fn active_users(&self) -> usize {
        let mut seen: Vec<usize> = self.shares.iter().map(|s| s.user).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

fn share(p: &OperatingPoint, tau: f64) -> Share {
    Share {
        user: p.user,
        tau,
        rate: p.rate,
        mode: p.mode,
    }
}

/// Allocation realizing a classified water level.
pub fn allocation_from_level(users: usize, point: &LevelPoint, tau0: f64) -> Allocation {
    let shares = match point {
        LevelPoint::BelowAll => Vec::new(),
        LevelPoint::Interior(p) => vec![share(p, 1.0)],
        LevelPoint::Tie {
            primary, secondary, ..
        } => {
            let mut v = vec![share(primary, tau0)];
            if let Some(s) = secondary {
                v.push(share(s, 1.0 - tau0));
            }
            v
        }
    };
    Allocation::from_shares_unchecked(users, shares)
}

/// Weighted rate `Σ w_k τ_k r_k` of a classified level.
fn level_reward(point: &LevelPoint, tau0: f64) -> f64 {
    match point {
        LevelPoint::BelowAll => 0.0,
        LevelPoint::Interior(p) => p.reward,
        LevelPoint::Tie {
            primary, secondary, ..
        } => tau0 * primary.reward + (1.0 - tau0) * secondary.map_or(0.0, |s| s.reward),
    }
}

/// Water-filling allocation of one state at level `lambda`.
pub fn allocate_state(
    profiles: &[UserProfile],
    state: &FadingState,
    lambda: f64,
    tau0: f64,
) -> Result<Allocation> {
    if !(lambda >= 0.0) {
        return invalid(format!("water level must be non-negative, got {lambda}"));
    }
    if !(0.0..=1.0).contains(&tau0) {
        return invalid(format!("tie fraction must lie in [0, 1], got {tau0}"));
    }
    let env = build_envelope(profiles, state)?;
    Ok(allocation_from_level(
        profiles.len(),
        &env.rate_at_level(lambda),
        tau0,
    ))
}

/// Per-user block powers `τ_k p_k` (transmit power, not weighted cost).
pub fn state_power(
    profiles: &[UserProfile],
    state: &FadingState,
    alloc: &Allocation,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; profiles.len()];
    for s in alloc.shares() {
        let p = &profiles[s.user];
        let h = state.gain(s.user);
        let power = match (p.table(), s.mode) {
            (None, _) => exp2_m1(s.rate) / h,
            (Some(t), Some(l)) if l >= 1 && l <= t.len() => t.mode(l).p / h,
            (Some(t), _) => {
                if s.rate > t.max_rate() * (1.0 + 1e-12) {
                    return Err(Error::RateAboveTable {
                        user: s.user,
                        rate: s.rate,
                        max_rate: t.max_rate(),
                    });
                }
                crate::costreward::amc_upsilon(t, h, s.rate.min(t.max_rate()))
            }
        };
        out[s.user] += s.tau * power;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WsumOptions {
    /// Relative tolerance on the achieved weighted rate.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction given to the first operating point on a slope tie.
    pub tau0: f64,
}

impl Default for WsumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 200,
            tau0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsumSolution {
    #[serde(rename = "lambda")]
    pub lambda_star: f64,
    pub tau0: f64,
    pub target_rate: f64,
    pub avg_rate: f64,
    /// `E[τ_k r_k]` per user.
    pub user_rates: Vec<f64>,
    pub avg_power: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// States whose allocation time-shares on a slope tie.
    pub ties: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Averages of one evaluation at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub weighted_rate: f64,
    pub user_rates: Vec<f64>,
    pub powers: Vec<f64>,
    pub ties: usize,
}

/// Envelopes of a fixed sample, built once and reused across levels.
pub struct WsumProblem<'a> {
    profiles: Vec<UserProfile>,
    sample: &'a SampleSet,
    envelopes: Vec<Envelope>,
}

impl<'a> WsumProblem<'a> {
    pub fn new(profiles: &[UserProfile], sample: &'a SampleSet) -> Result<Self> {
        if profiles.len() != sample.users() {
            return invalid(format!(
                "{} profiles for a {}-user sample",
                profiles.len(),
                sample.users()
            ));
        }
        let envelopes = sample
            .states()
            .par_iter()
            .map(|s| build_envelope(profiles, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            profiles: profiles.to_vec(),
            sample,
            envelopes,
        })
    }

    pub fn envelopes(&self) -> &[Envelope] {
        &self.envelopes
    }

    pub fn profiles(&self) -> &[UserProfile] {
        &self.profiles
    }

    /// Mean of the largest deliverable weighted rate per state.
    pub fn max_weighted_rate(&self) -> f64 {
        par_mean(&self.envelopes, |e| e.max_reward())
    }

    pub fn weighted_rate(&self, lambda: f64, tau0: f64) -> f64 {
        par_mean(&self.envelopes, |e| {
            level_reward(&e.rate_at_level(lambda), tau0)
        })
    }

    pub fn allocations(&self, lambda: f64, tau0: f64) -> Vec<Allocation> {
        let k = self.profiles.len();
        self.envelopes
            .par_iter()
            .map(|e| allocation_from_level(k, &e.rate_at_level(lambda), tau0))
            .collect()
    }

    pub fn evaluate(&self, lambda: f64, tau0: f64) -> Result<Evaluation> {
        let k = self.profiles.len();
        let pairs: Vec<(&Envelope, &FadingState)> =
            self.envelopes.iter().zip(self.sample.states()).collect();
        let failed = std::sync::atomic::AtomicBool::new(false);
        let row = par_mean_rows(&pairs, 2 + 2 * k, |(env, state), out| {
            let point = env.rate_at_level(lambda);
            let alloc = allocation_from_level(k, &point, tau0);
            out[0] = alloc.weighted_rate(&self.profiles);
            out[1] = f64::from(matches!(point, LevelPoint::Tie { .. }));
            for u in 0..k {
                out[2 + u] = alloc.served_rate(u);
            }
            match state_power(&self.profiles, state, &alloc) {
                Ok(p) => out[2 + k..].copy_from_slice(&p),
                Err(_) => failed.store(true, std::sync::atomic::Ordering::Relaxed),
            }
        });
        if failed.into_inner() {
            return invalid("allocation exceeds a mode table");
        }
        Ok(Evaluation {
            weighted_rate: row[0],
            ties: (row[1] * self.envelopes.len() as f64).round() as usize,
            user_rates: row[2..2 + k].to_vec(),
            powers: row[2 + k..].to_vec(),
        })
    }

    /// Finite envelope slope closest (relatively) to `lambda`.
    fn nearest_slope(&self, lambda: f64) -> Option<f64> {
        self.envelopes
            .iter()
            .flat_map(|e| e.finite_slopes().iter().copied())
            .min_by(|a, b| ((a - lambda).abs() / a).total_cmp(&((b - lambda).abs() / b)))
    }

    pub fn solve(&self, target: f64, opts: &WsumOptions) -> Result<WsumSolution> {
        if !(target > 0.0 && target.is_finite()) {
            return invalid(format!("target rate must be positive, got {target}"));
        }
        if !(0.0..=1.0).contains(&opts.tau0) {
            return invalid(format!(
                "tie fraction must lie in [0, 1], got {}",
                opts.tau0
            ));
        }
        if !(opts.tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        let ceiling = self.max_weighted_rate();
        if ceiling < target {
            return Err(Error::Infeasible {
                target,
                achievable: ceiling,
            });
        }
        let tau0 = opts.tau0;
        let close = |r: f64| (r - target).abs() <= opts.tol * target;

        let mut iterations = 0;
        let (mut lo, mut hi) = (0.0, 1.0);
        loop {
            let r = self.weighted_rate(hi, tau0);
            iterations += 1;
            if close(r) {
                return self.finish(target, hi, tau0, iterations);
            }
            if r > target {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 2f64.powi(60) {
                return Err(Error::Infeasible {
                    target,
                    achievable: r,
                });
            }
        }
        while iterations < opts.max_iter {
            let mid = 0.5 * (lo + hi);
            let r = self.weighted_rate(mid, tau0);
            iterations += 1;
            if close(r) {
                return self.finish(target, mid, tau0, iterations);
            }
            if r < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                return self.resolve_jump(target, lo, hi, opts, iterations);
            }
        }
        Err(Error::NoConvergence {
            iterations,
            lo,
            hi,
            residual: self.weighted_rate(0.5 * (lo + hi), tau0) - target,
        })
    }

    /// The rate jumps across the bracket: sit on the envelope slope there and
    /// pick the tie fraction, which enters the rate affinely.
    fn resolve_jump(
        &self,
        target: f64,
        lo: f64,
        hi: f64,
        opts: &WsumOptions,
        iterations: usize,
    ) -> Result<WsumSolution> {
        let fail = |residual: f64| Error::NoConvergence {
            iterations,
            lo,
            hi,
            residual,
        };
        let mid = 0.5 * (lo + hi);
        let s = match self.nearest_slope(mid) {
            Some(s) if (s - mid).abs() <= 1e-9 * s => s,
            _ => return Err(fail(self.weighted_rate(mid, opts.tau0) - target)),
        };
        let r0 = self.weighted_rate(s, 0.0);
        let r1 = self.weighted_rate(s, 1.0);
        if r1 == r0 {
            return Err(fail(r0 - target));
        }
        let tau0 = ((target - r0) / (r1 - r0)).clamp(0.0, 1.0);
        let r = self.weighted_rate(s, tau0);
        debug!("rate jump at level {s}: tie fraction {tau0}");
        if (r - target).abs() > opts.tol * target {
            return Err(fail(r - target));
        }
        self.finish(target, s, tau0, iterations + 3)
    }

    fn finish(
        &self,
        target: f64,
        lambda: f64,
        tau0: f64,
        iterations: usize,
    ) -> Result<WsumSolution> {
        let ev = self.evaluate(lambda, tau0)?;
        let objective = self
            .profiles
            .iter()
            .zip(&ev.powers)
            .map(|(p, pw)| p.mu * pw)
            .sum();
        Ok(WsumSolution {
            lambda_star: lambda,
            tau0,
            target_rate: target,
            avg_rate: ev.weighted_rate,
            user_rates: ev.user_rates,
            avg_power: ev.powers,
            objective,
            iterations,
            ties: ev.ties,
            samples: self.sample.count(),
            seed: self.sample.seed(),
        })
    }
}

/// Solves the weighted sum-rate problem on a fixed sample.
pub fn solve(
    profiles: &[UserProfile],
    sample: &SampleSet,
    target: f64,
    opts: &WsumOptions,
) -> Result<WsumSolution> {
    WsumProblem::new(profiles, sample)?.solve(target, opts)
}
