//! Deterministic rates and powers of the greedy policy for independent
//! Rayleigh fading, by one-dimensional quadrature per user.
//!
//! User `k` wins a block at gain `z` when every competitor `i` has a gain below
//! the level `s_ik(z)` at which its indicator matches `φ_k(z)`, so
//! `E[τ_k g(h_k)] = ∫ g(z) Π_{i≠k} F_i(s_ik(z)) dF_k(z)`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{check_profiles, UserModel};
use crate::channel::{rayleigh_cdf, ChannelModel, Fading};
use crate::error::{invalid, Error, Result};
use crate::quad::integrate_pieces;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub rates: Vec<f64>,
    pub powers: Vec<f64>,
}

const REL_TOL: f64 = 1e-10;

/// `ln t` solving `1 − 1/t − ln t = c` for `c < 0`, `t > 1`.
fn invert_indicator_shape(c: f64) -> f64 {
    let psi = |u: f64| -(-u).exp_m1() - u;
    let (mut lo, mut hi) = (0.0, 1.0 - c);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if psi(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gain at which user `i` (level `lambda`) reaches indicator value `v < 0`;
/// `+∞` when it never does.
fn competitor_threshold(model: &UserModel, lambda: f64, v: f64) -> f64 {
    match model {
        UserModel::Infinite { mu } => {
            let u = invert_indicator_shape(v * LN_2 / lambda);
            u.exp() * LN_2 * mu / lambda
        }
        UserModel::Amc { mu, rho, p, .. } => rho
            .iter()
            .zip(p)
            .filter_map(|(&r, &pw)| {
                let d = v + lambda * r;
                (d > 0.0).then(|| mu * pw / d)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Rates `E[τ_k r_k]` and powers `E[τ_k p_k]` at levels `lambda`.
pub fn corollary_quadrature(
    profiles: &[crate::costreward::UserProfile],
    model: &ChannelModel,
    lambda: &[f64],
) -> Result<QuadratureResult> {
    check_profiles(profiles)?;
    let k = profiles.len();
    if model.len() != k || lambda.len() != k {
        return invalid("profiles, channel model and levels must have the same length");
    }
    if lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return invalid("water levels must be positive and finite");
    }
    let means = model
        .users()
        .iter()
        .map(|f| match f {
            Fading::RayleighPower { mean_gain } => Ok(*mean_gain),
            _ => Err(Error::Unsupported(
                "quadrature needs Rayleigh fading for every user".into(),
            )),
        })
        .collect::<Result<Vec<f64>>>()?;
    let models: Vec<UserModel> = profiles.iter().map(UserModel::new).collect();

    let mut rates = Vec::with_capacity(k);
    let mut powers = Vec::with_capacity(k);
    for u in 0..k {
        let m = means[u];
        let z_max = m * 1e12f64.ln();
        let lu = lambda[u];
        let win = |z: f64, phi: f64| -> f64 {
            (0..k)
                .filter(|&i| i != u)
                .map(|i| {
                    let s = competitor_threshold(&models[i], lambda[i], phi);
                    if s.is_finite() {
                        rayleigh_cdf(means[i], s).unwrap_or(0.0)
                    } else {
                        1.0
                    }
                })
                .product::<f64>()
                * (-z / m).exp()
                / m
        };
        let mut points: Vec<f64> = match &models[u] {
            UserModel::Infinite { mu } => vec![LN_2 * mu / lu],
            UserModel::Amc { mu, gamma, .. } => gamma.iter().map(|g| mu * g / lu).collect(),
        };
        let start = points[0];
        if start >= z_max {
            rates.push(0.0);
            powers.push(0.0);
            continue;
        }
        points.retain(|&z| z < z_max);
        for extra in [start + m, start + 4.0 * m] {
            if extra < z_max {
                points.push(extra);
            }
        }
        points.push(z_max);
        points.sort_by(f64::total_cmp);
        points.dedup();

        let model_u = &models[u];
        let rate_f = |z: f64| {
            let q = model_u.quality(z, lu);
            if q.phi < 0.0 {
                q.rate * win(z, q.phi)
            } else {
                0.0
            }
        };
        let power_f = |z: f64| {
            let q = model_u.quality(z, lu);
            if !(q.phi < 0.0) {
                return 0.0;
            }
            let p = match model_u {
                UserModel::Infinite { mu } => lu / (LN_2 * mu) - 1.0 / z,
                UserModel::Amc { p, .. } => p[q.mode.unwrap_or(1) - 1] / z,
            };
            p * win(z, q.phi)
        };
        rates.push(integrate_pieces(rate_f, &points, REL_TOL, 1e-300));
        powers.push(integrate_pieces(power_f, &points, REL_TOL, 1e-300));
    }
    Ok(QuadratureResult { rates, powers })
}
