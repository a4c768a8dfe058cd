//! Common tangent of two exponential cost curves.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::UserProfile;
use crate::error::{Error, Result};

/// Slope `s0` of the common tangent and the two touching rate-rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub s0: f64,
    pub ra: f64,
    pub rb: f64,
    /// Stationary point of the tangency function; `s0 > xi`.
    pub xi: f64,
}

/// Minimal per-state description of one exponential curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Curve {
    pub w: f64,
    pub mu: f64,
    pub h: f64,
}

impl Curve {
    /// `μ/(w h)`, the activation ratio.
    #[inline]
    pub fn ratio(&self) -> f64 {
        self.mu / (self.w * self.h)
    }

    /// `log2(ln2·μ/(w h))`: the log of the slope at zero.
    #[inline]
    pub fn log2_slope0(&self) -> f64 {
        (LN_2 * self.ratio()).log2()
    }

    #[cfg(test)]
    pub fn value(&self, x: f64) -> f64 {
        super::exp_cr(self.mu, self.w, self.h, x)
    }
}

const REL_TOL: f64 = 1e-12;

/// Root of the tangency condition, solved in `y = log2 s` so huge slopes never
/// overflow. Returns `None` when no root exists above the stationary point, a
/// touching point would sit at a negative rate, or the tangent lies beyond the
/// floating-point range.
pub(crate) fn tangent_between(c1: &Curve, c2: &Curve) -> Option<Tangent> {
    let dw = c2.w - c1.w;
    if dw <= 0.0 {
        return None;
    }
    let l1 = c1.log2_slope0();
    let l2 = c2.log2_slope0();
    let y_xi = (c2.w * l2 - c1.w * l1) / dw;
    let d = c2.mu / c2.h - c1.mu / c1.h;
    // g(s)/s with s = 2^y; same sign as g, increasing past the stationary point
    let g = |y: f64| dw * ((y - y_xi) - 1.0 / LN_2) + d * (-y).exp2();

    let mut lo = y_xi + (REL_TOL).ln_1p() / LN_2;
    if !(g(lo) < 0.0) {
        return None;
    }
    let mut hi = y_xi + 64.0;
    let mut expansions = 0;
    while !(g(hi) > 0.0) {
        lo = hi;
        hi += 64.0;
        expansions += 1;
        if expansions > 32 || !hi.is_finite() {
            return None;
        }
    }
    let width = REL_TOL.ln_1p() / LN_2;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    // slopes past 2^1000 mean costs beyond the f64 range at the touching points
    if y > 1000.0 {
        return None;
    }
    let ra = c1.w * (y - l1);
    let rb = c2.w * (y - l2);
    if !(ra > 0.0 && rb > ra && rb.is_finite()) {
        return None;
    }
    Some(Tangent {
        s0: y.exp2(),
        ra,
        rb,
        xi: y_xi.exp2(),
    })
}

/// Common tangent of the curves of two users at gains `(h1, h2)`.
///
/// Requires `w1 < w2` and `μ1/(w1 h1) < μ2/(w2 h2)`.
pub fn tangent_slope(profiles: (&UserProfile, &UserProfile), gains: (f64, f64)) -> Result<Tangent> {
    let c1 = Curve {
        w: profiles.0.w,
        mu: profiles.0.mu,
        h: gains.0,
    };
    let c2 = Curve {
        w: profiles.1.w,
        mu: profiles.1.mu,
        h: gains.1,
    };
    let fail = |reason: &str| Error::BracketNotFound {
        first: 0,
        second: 1,
        reason: reason.to_string(),
    };
    if !(gains.0 > 0.0 && gains.1 > 0.0) {
        return Err(Error::InvalidParameter("gains must be positive".into()));
    }
    if !(c1.mu > 0.0 && c2.mu > 0.0) {
        return Err(Error::InvalidParameter(
            "cost weights must be positive".into(),
        ));
    }
    if c1.w >= c2.w {
        return Err(fail("the first curve must have the smaller rate weight"));
    }
    if c1.ratio() >= c2.ratio() {
        return Err(fail("the first curve dominates the second everywhere"));
    }
    tangent_between(&c1, &c2).ok_or_else(|| fail("no root above the stationary point"))
}
