//! Convex envelope of the pointwise minimum of per-user cost curves.

use std::f64::consts::LN_2;

use log::warn;
use serde::{Deserialize, Serialize};

use super::tangent::{tangent_between, Curve};
use super::{exp_cr, UserProfile};
use crate::channel::FadingState;
use crate::error::{invalid, Error, Result};

/// Relative band inside which a water level is treated as equal to a slope.
pub(crate) const TIE_REL: f64 = 1e-12;

#[inline]
fn is_tie(lambda: f64, slope: f64) -> bool {
    slope.is_finite() && (lambda - slope).abs() <= TIE_REL * slope
}

/// One exponential curve that survives on the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveCurve {
    pub user: usize,
    pub w: f64,
    pub mu: f64,
    pub h: f64,
}

impl ActiveCurve {
    fn curve(&self) -> Curve {
        Curve {
            w: self.w,
            mu: self.mu,
            h: self.h,
        }
    }

    /// Slope of the curve at zero rate-reward.
    pub fn slope_at_zero(&self) -> f64 {
        LN_2 * self.mu / (self.w * self.h)
    }

    pub fn cost(&self, reward: f64) -> f64 {
        exp_cr(self.mu, self.w, self.h, reward)
    }

    /// Rate-reward where the slope equals `lambda`, clamped at zero.
    pub fn reward_at_slope(&self, lambda: f64) -> f64 {
        let x = self.w * (lambda.log2() - self.slope_at_zero().log2());
        if x > 0.0 {
            x
        } else {
            0.0
        }
    }
}

/// Envelope built from unbounded-codebook curves.
///
/// `slopes[m]` is the common-tangent slope between `users[m]` and `users[m+1]`,
/// touching at `ra[m]` and `rb[m]`; the last slope is `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousEnvelope {
    pub users: Vec<ActiveCurve>,
    pub slopes: Vec<f64>,
    pub ra: Vec<f64>,
    pub rb: Vec<f64>,
}

/// Vertex of a piecewise-linear envelope, labelled with the owning user and
/// 1-based mode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub user: usize,
    pub mode: usize,
    pub rate: f64,
    pub reward: f64,
    pub cost: f64,
}

/// Envelope built from AMC mode tables. `slopes[m]` is the slope of the segment
/// ending at `corners[m]` (the first one starts at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlEnvelope {
    pub corners: Vec<Corner>,
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Continuous(ContinuousEnvelope),
    PiecewiseLinear(PwlEnvelope),
}

/// A single-user operating point on the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub user: usize,
    /// Rate in bits/s/Hz while the user transmits.
    pub rate: f64,
    pub reward: f64,
    pub mode: Option<usize>,
}

/// Classification of a water level against the envelope slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LevelPoint {
    /// The level does not exceed the slope at zero: nobody transmits.
    BelowAll,
    Interior(OperatingPoint),
    /// The level equals the slope of segment `segment`. The tie fraction `τ0`
    /// goes to `primary` and `1 − τ0` to `secondary` (`None` is idle time).
    Tie {
        segment: usize,
        primary: OperatingPoint,
        secondary: Option<OperatingPoint>,
    },
}

impl ContinuousEnvelope {
    pub fn active_count(&self) -> usize {
        self.users.len()
    }

    pub fn eval(&self, reward: f64) -> f64 {
        if reward <= 0.0 {
            return 0.0;
        }
        for m in 0..self.ra.len() {
            if reward <= self.ra[m] {
                return self.users[m].cost(reward);
            }
            if reward <= self.rb[m] {
                return self.users[m].cost(self.ra[m]) + self.slopes[m] * (reward - self.ra[m]);
            }
        }
        self.users[self.users.len() - 1].cost(reward)
    }

    /// Right derivative of the envelope.
    pub fn slope_at(&self, reward: f64) -> f64 {
        let x = reward.max(0.0);
        for m in 0..self.ra.len() {
            if x < self.ra[m] {
                let u = &self.users[m];
                return super::exp_cr_derivative(u.mu, u.w, u.h, x);
            }
            if x < self.rb[m] {
                return self.slopes[m];
            }
        }
        let u = &self.users[self.users.len() - 1];
        super::exp_cr_derivative(u.mu, u.w, u.h, x)
    }

    fn point(&self, m: usize, reward: f64) -> OperatingPoint {
        let u = &self.users[m];
        OperatingPoint {
            user: u.user,
            rate: reward / u.w,
            reward,
            mode: None,
        }
    }

    pub fn rate_at_level(&self, lambda: f64) -> LevelPoint {
        if !(lambda > self.users[0].slope_at_zero()) {
            return LevelPoint::BelowAll;
        }
        for m in 0..self.ra.len() {
            let s = self.slopes[m];
            if is_tie(lambda, s) {
                return LevelPoint::Tie {
                    segment: m,
                    primary: self.point(m, self.ra[m]),
                    secondary: Some(self.point(m + 1, self.rb[m])),
                };
            }
            if lambda < s {
                return self.interior(m, lambda);
            }
        }
        self.interior(self.users.len() - 1, lambda)
    }

    fn interior(&self, m: usize, lambda: f64) -> LevelPoint {
        let reward = self.users[m].reward_at_slope(lambda);
        if reward > 0.0 {
            LevelPoint::Interior(self.point(m, reward))
        } else {
            LevelPoint::BelowAll
        }
    }
}

impl PwlEnvelope {
    pub fn active_count(&self) -> usize {
        self.corners.len()
    }

    pub fn max_reward(&self) -> f64 {
        self.corners[self.corners.len() - 1].reward
    }

    pub fn eval(&self, reward: f64) -> f64 {
        if reward <= 0.0 {
            return 0.0;
        }
        let (mut x0, mut y0) = (0.0, 0.0);
        for (c, s) in self.corners.iter().zip(&self.slopes) {
            if reward <= c.reward {
                return y0 + s * (reward - x0);
            }
            x0 = c.reward;
            y0 = c.cost;
        }
        f64::INFINITY
    }

    fn point(&self, m: usize) -> OperatingPoint {
        let c = &self.corners[m];
        OperatingPoint {
            user: c.user,
            rate: c.rate,
            reward: c.reward,
            mode: Some(c.mode),
        }
    }

    pub fn rate_at_level(&self, lambda: f64) -> LevelPoint {
        for (m, &s) in self.slopes.iter().enumerate() {
            if is_tie(lambda, s) {
                return LevelPoint::Tie {
                    segment: m,
                    primary: self.point(m),
                    secondary: if m == 0 {
                        None
                    } else {
                        Some(self.point(m - 1))
                    },
                };
            }
            if lambda < s {
                return if m == 0 {
                    LevelPoint::BelowAll
                } else {
                    LevelPoint::Interior(self.point(m - 1))
                };
            }
        }
        LevelPoint::Interior(self.point(self.corners.len() - 1))
    }
}

impl Envelope {
    pub fn eval(&self, reward: f64) -> f64 {
        match self {
            Envelope::Continuous(e) => e.eval(reward),
            Envelope::PiecewiseLinear(e) => e.eval(reward),
        }
    }

    pub fn rate_at_level(&self, lambda: f64) -> LevelPoint {
        match self {
            Envelope::Continuous(e) => e.rate_at_level(lambda),
            Envelope::PiecewiseLinear(e) => e.rate_at_level(lambda),
        }
    }

    /// Largest deliverable rate-reward (`+∞` for unbounded codebooks).
    pub fn max_reward(&self) -> f64 {
        match self {
            Envelope::Continuous(_) => f64::INFINITY,
            Envelope::PiecewiseLinear(e) => e.max_reward(),
        }
    }

    /// Finite slopes of the envelope, in increasing order.
    pub fn finite_slopes(&self) -> &[f64] {
        match self {
            Envelope::Continuous(e) => &e.slopes[..e.slopes.len() - 1],
            Envelope::PiecewiseLinear(e) => &e.slopes,
        }
    }

    pub fn active_count(&self) -> usize {
        match self {
            Envelope::Continuous(e) => e.active_count(),
            Envelope::PiecewiseLinear(e) => e.active_count(),
        }
    }
}

fn check_inputs(profiles: &[UserProfile], state: &FadingState) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::Empty("user profiles"));
    }
    if profiles.len() != state.users() {
        return invalid(format!(
            "{} profiles but the fading state has {} gains",
            profiles.len(),
            state.users()
        ));
    }
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

/// Envelope of unbounded-codebook curves: dominance pruning, then a chain of
/// minimal common tangents.
pub fn build_envelope_continuous(
    profiles: &[UserProfile],
    state: &FadingState,
) -> Result<ContinuousEnvelope> {
    check_inputs(profiles, state)?;
    if profiles.iter().any(|p| p.is_amc()) {
        return invalid("continuous envelope requires unbounded codebooks");
    }
    let curves: Vec<ActiveCurve> = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| ActiveCurve {
            user: k,
            w: p.w,
            mu: p.mu,
            h: state.gain(k),
        })
        .collect();
    let ratio = |c: &ActiveCurve| c.mu / (c.w * c.h);

    let mut alive: Vec<ActiveCurve> = curves
        .iter()
        .filter(|ck| {
            !curves.iter().any(|ci| {
                if ci.user == ck.user || !(ck.w <= ci.w && ratio(ck) >= ratio(ci)) {
                    return false;
                }
                // an exact duplicate only loses to a lower index
                let duplicate = ck.w == ci.w && ratio(ck) == ratio(ci);
                !duplicate || ci.user < ck.user
            })
        })
        .copied()
        .collect();
    alive.sort_by(|a, b| a.w.total_cmp(&b.w).then(a.user.cmp(&b.user)));

    let mut users = vec![alive[0]];
    let (mut slopes, mut ra, mut rb) = (Vec::new(), Vec::new(), Vec::new());
    let mut cur = 0;
    while cur + 1 < alive.len() {
        let base = alive[cur].curve();
        let mut best: Option<(usize, super::Tangent)> = None;
        for (j, cand) in alive.iter().enumerate().skip(cur + 1) {
            match tangent_between(&base, &cand.curve()) {
                Some(t) => {
                    let better = match &best {
                        None => true,
                        Some((_, b)) => t.s0 < b.s0 && (b.s0 - t.s0) > TIE_REL * b.s0,
                    };
                    if better {
                        best = Some((j, t));
                    }
                }
                None => warn!(
                    "no common tangent between users {} and {} at gains ({}, {}); pair skipped",
                    alive[cur].user, cand.user, alive[cur].h, cand.h
                ),
            }
        }
        let Some((j, t)) = best else { break };
        slopes.push(t.s0);
        ra.push(t.ra);
        rb.push(t.rb);
        users.push(alive[j]);
        cur = j;
    }
    slopes.push(f64::INFINITY);
    Ok(ContinuousEnvelope {
        users,
        slopes,
        ra,
        rb,
    })
}

/// Envelope of AMC mode curves: the lower convex hull of all mode points and the
/// origin, walked from the origin by always taking the smallest slope. Among
/// collinear candidates the farthest point wins, so slopes strictly increase.
pub fn build_envelope_amc(profiles: &[UserProfile], state: &FadingState) -> Result<PwlEnvelope> {
    check_inputs(profiles, state)?;
    let mut points: Vec<Corner> = Vec::new();
    for (k, p) in profiles.iter().enumerate() {
        let table = p
            .table()
            .ok_or_else(|| Error::InvalidParameter("AMC envelope requires mode tables".into()))?;
        let h = state.gain(k);
        for (l, m) in table.modes().iter().enumerate() {
            points.push(Corner {
                user: k,
                mode: l + 1,
                rate: m.rho,
                reward: p.w * m.rho,
                cost: p.mu * m.p / h,
            });
        }
    }
    if points.is_empty() {
        return Err(Error::Empty("AMC mode tables"));
    }

    let mut corners = Vec::new();
    let mut slopes = Vec::new();
    let (mut cx, mut cy) = (0.0, 0.0);
    loop {
        let mut best: Option<&Corner> = None;
        for q in points.iter().filter(|q| q.reward > cx) {
            best = match best {
                None => Some(q),
                Some(b) => {
                    let cross = (b.reward - cx) * (q.cost - cy) - (b.cost - cy) * (q.reward - cx);
                    let take = cross < 0.0
                        || (cross == 0.0
                            && (q.reward > b.reward || (q.reward == b.reward && q.user < b.user)));
                    Some(if take { q } else { b })
                }
            };
        }
        let Some(b) = best else { break };
        slopes.push((b.cost - cy) / (b.reward - cx));
        corners.push(*b);
        cx = b.reward;
        cy = b.cost;
    }
    Ok(PwlEnvelope { corners, slopes })
}

/// Dispatches on the (uniform) codebook kind.
pub fn build_envelope(profiles: &[UserProfile], state: &FadingState) -> Result<Envelope> {
    if super::uniform_kind(profiles)? {
        build_envelope_amc(profiles, state).map(Envelope::PiecewiseLinear)
    } else {
        build_envelope_continuous(profiles, state).map(Envelope::Continuous)
    }
}
