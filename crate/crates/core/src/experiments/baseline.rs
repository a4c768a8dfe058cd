//! Equal-time baselines: per-user water-filling (A) and fixed per-user power (B).
//!
//! Both give every user a fixed `1/K` share of each block. Under AMC, policy B
//! keeps a fixed transmit power `p_k`; in each block the user sends the highest
//! mode whose required received power fits (`p_mode/h ≤ p_k`) and stays silent
//! when none does.

use std::f64::consts::LN_2;

use crate::channel::SampleSet;
use crate::costreward::{Codebook, UserProfile};
use crate::error::{invalid, Error, Result};
use crate::numeric::{par_mean, positive_part};

/// Root of a non-decreasing `f` at `target`, by geometric bisection from `start`.
pub(crate) fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, start: f64) -> Result<f64> {
    let (mut lo, mut hi) = (start, start);
    let mut guard = 0;
    while f(lo) > target {
        lo /= 4.0;
        guard += 1;
        if guard > 600 {
            return invalid("level bracket underflow");
        }
    }
    guard = 0;
    let mut r = f(hi);
    while r < target {
        hi *= 4.0;
        guard += 1;
        if guard > 600 || !hi.is_finite() {
            return Err(Error::Infeasible {
                target,
                achievable: r,
            });
        }
        r = f(hi);
    }
    for _ in 0..300 {
        if hi / lo - 1.0 <= 1e-13 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn check(profiles: &[UserProfile], sample: &SampleSet, targets: &[f64]) -> Result<()> {
    if profiles.len() != sample.users() || targets.len() != profiles.len() {
        return invalid("profiles, sample and targets must cover the same users");
    }
    if targets.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return invalid("rate targets must be positive");
    }
    Ok(())
}

fn amc_ceiling(profile: &UserProfile, k: usize, target: f64) -> Result<()> {
    if let Some(t) = profile.table() {
        if target * k as f64 >= t.max_rate() {
            return Err(Error::Infeasible {
                target,
                achievable: t.max_rate() / k as f64,
            });
        }
    }
    Ok(())
}

/// Policy A: average power per user with separate single-user water-filling
/// during a fixed `1/K` share of every block.
pub fn policy_a(profiles: &[UserProfile], sample: &SampleSet, targets: &[f64]) -> Result<Vec<f64>> {
    check(profiles, sample, targets)?;
    let k = profiles.len();
    let frac = 1.0 / k as f64;
    let states = sample.states();
    (0..k)
        .map(|u| {
            amc_ceiling(&profiles[u], k, targets[u])?;
            match &profiles[u].codebook {
                Codebook::Infinite => {
                    let rate = |l: f64| {
                        frac * par_mean(states, |s| positive_part((l * s.gain(u) / LN_2).log2()))
                    };
                    let l = bisect_increasing(rate, targets[u], 1.0)?;
                    Ok(frac * par_mean(states, |s| positive_part(l / LN_2 - 1.0 / s.gain(u))))
                }
                Codebook::Amc { table } => {
                    let gamma = table.gammas();
                    let modes = table.modes();
                    let pick = |l: f64, h: f64| gamma.iter().take_while(|g| **g / h <= l).count();
                    let rate = |l: f64| {
                        frac * par_mean(states, |s| match pick(l, s.gain(u)) {
                            0 => 0.0,
                            m => modes[m - 1].rho,
                        })
                    };
                    let l = bisect_increasing(rate, targets[u], gamma[0])?;
                    Ok(frac
                        * par_mean(states, |s| match pick(l, s.gain(u)) {
                            0 => 0.0,
                            m => modes[m - 1].p / s.gain(u),
                        }))
                }
            }
        })
        .collect()
}

/// Policy B: average power per user with a fixed transmit power during a fixed
/// `1/K` share of every block.
pub fn policy_b(profiles: &[UserProfile], sample: &SampleSet, targets: &[f64]) -> Result<Vec<f64>> {
    check(profiles, sample, targets)?;
    let k = profiles.len();
    let frac = 1.0 / k as f64;
    let states = sample.states();
    (0..k)
        .map(|u| {
            amc_ceiling(&profiles[u], k, targets[u])?;
            match &profiles[u].codebook {
                Codebook::Infinite => {
                    let rate = |p: f64| frac * par_mean(states, |s| (p * s.gain(u)).ln_1p() / LN_2);
                    let p = bisect_increasing(rate, targets[u], 1.0)?;
                    Ok(frac * p)
                }
                Codebook::Amc { table } => {
                    let modes = table.modes();
                    let pick = |p: f64, h: f64| modes.iter().take_while(|m| m.p / h <= p).count();
                    let rate = |p: f64| {
                        frac * par_mean(states, |s| match pick(p, s.gain(u)) {
                            0 => 0.0,
                            m => modes[m - 1].rho,
                        })
                    };
                    let p = bisect_increasing(rate, targets[u], modes[0].p)?;
                    let on = par_mean(states, |s| f64::from(pick(p, s.gain(u)) > 0));
                    Ok(frac * p * on)
                }
            }
        })
        .collect()
}
