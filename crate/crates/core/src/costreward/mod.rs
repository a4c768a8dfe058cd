//! Per-state power-cost versus rate-reward curves and their convex envelope.
//!
//! For a fixed fading state, user `k` delivering rate-reward `x = w_k r` costs
//! `f_k(x) = (μ_k/h_k)(2^{x/w_k} − 1)` with an unbounded codebook, or the
//! piecewise-linear mode curve scaled by `μ_k/h_k` with a finite mode table.

mod envelope;
mod tangent;

pub use envelope::{
    build_envelope, build_envelope_amc, build_envelope_continuous, ActiveCurve, ContinuousEnvelope,
    Corner, Envelope, LevelPoint, OperatingPoint, PwlEnvelope,
};
pub use tangent::{tangent_slope, Tangent};

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One AMC operating point: rate in bits/s/Hz and the minimum received
/// (noise-normalized) power that supports it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub rho: f64,
    pub p: f64,
}

/// Finite mode set. Mode 0 is the implicit idle point `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mode>", into = "Vec<Mode>")]
pub struct AmcTable {
    modes: Vec<Mode>,
}

impl TryFrom<Vec<Mode>> for AmcTable {
    type Error = Error;

    fn try_from(modes: Vec<Mode>) -> Result<Self> {
        AmcTable::new(modes)
    }
}

impl From<AmcTable> for Vec<Mode> {
    fn from(t: AmcTable) -> Self {
        t.modes
    }
}

impl AmcTable {
    /// Validates strictly increasing rates, powers and incremental slopes.
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Empty("AMC mode table"));
        }
        let mut prev = Mode { rho: 0.0, p: 0.0 };
        let mut prev_gamma = 0.0;
        for (l, m) in modes.iter().enumerate() {
            if !(m.rho.is_finite() && m.p.is_finite()) {
                return invalid(format!("mode {} is not finite", l + 1));
            }
            if m.rho <= prev.rho || m.p <= prev.p {
                return invalid(format!(
                    "mode {} must increase both rate and power over the previous mode",
                    l + 1
                ));
            }
            let gamma = (m.p - prev.p) / (m.rho - prev.rho);
            if gamma <= prev_gamma {
                return invalid(format!(
                    "incremental power per bit must increase across modes (mode {}: {gamma} after {prev_gamma})",
                    l + 1
                ));
            }
            prev = *m;
            prev_gamma = gamma;
        }
        Ok(Self { modes })
    }

    /// Builds from `(rho, p)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(rho, p)| Mode { rho, p }).collect())
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.modes[self.modes.len() - 1].rho
    }

    /// Incremental slopes `γ_l`, one per mode.
    pub fn gammas(&self) -> Vec<f64> {
        let mut prev = Mode { rho: 0.0, p: 0.0 };
        self.modes
            .iter()
            .map(|m| {
                let g = (m.p - prev.p) / (m.rho - prev.rho);
                prev = *m;
                g
            })
            .collect()
    }

    /// Mode `l` with `0` meaning idle.
    pub fn mode(&self, l: usize) -> Mode {
        if l == 0 {
            Mode { rho: 0.0, p: 0.0 }
        } else {
            self.modes[l - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Codebook {
    Infinite,
    Amc { table: AmcTable },
}

/// Rate-reward weight, power-cost weight and codebook of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub w: f64,
    pub mu: f64,
    pub codebook: Codebook,
}

impl UserProfile {
    pub fn new(w: f64, mu: f64, codebook: Codebook) -> Result<Self> {
        let p = Self { w, mu, codebook };
        p.validate()?;
        Ok(p)
    }

    pub fn infinite(w: f64, mu: f64) -> Result<Self> {
        Self::new(w, mu, Codebook::Infinite)
    }

    pub fn amc(w: f64, mu: f64, table: AmcTable) -> Result<Self> {
        Self::new(w, mu, Codebook::Amc { table })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w.is_finite() && self.w > 0.0) {
            return invalid(format!(
                "rate-reward weight must be positive, got {}",
                self.w
            ));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return invalid(format!(
                "power-cost weight must be non-negative, got {}",
                self.mu
            ));
        }
        Ok(())
    }

    pub fn table(&self) -> Option<&AmcTable> {
        match &self.codebook {
            Codebook::Amc { table } => Some(table),
            Codebook::Infinite => None,
        }
    }

    pub fn is_amc(&self) -> bool {
        matches!(self.codebook, Codebook::Amc { .. })
    }

    /// Power (not cost) needed at gain `h` to run rate `r` for the whole block.
    /// `+∞` when an AMC rate exceeds the top mode.
    pub fn power_for_rate(&self, h: f64, r: f64) -> f64 {
        match &self.codebook {
            Codebook::Infinite => exp2_m1(r) / h,
            Codebook::Amc { table } => amc_upsilon(table, h, r),
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }
}

/// Kind shared by every profile, or an error on mixed codebooks.
pub(crate) fn uniform_kind(profiles: &[UserProfile]) -> Result<bool> {
    let first = profiles.first().ok_or(Error::Empty("user profiles"))?;
    let amc = first.is_amc();
    if profiles.iter().any(|p| p.is_amc() != amc) {
        return Err(Error::Unsupported(
            "mixing infinite and AMC codebooks in one problem".into(),
        ));
    }
    Ok(amc)
}

/// Replaces zero power-cost weights by `eps` so the limiting extreme point can be
/// approached without special cases.
pub fn regularize_zero_costs(profiles: &[UserProfile], eps: f64) -> Vec<UserProfile> {
    profiles
        .iter()
        .map(|p| {
            if p.mu > 0.0 {
                p.clone()
            } else {
                p.with_mu(eps)
            }
        })
        .collect()
}

/// Default substitute for a zero cost weight.
pub const ZERO_COST_EPS: f64 = 1e-9;

/// `f(x) = (μ/h)(2^{x/w} − 1)`.
#[inline]
pub fn exp_cr(mu: f64, w: f64, h: f64, x: f64) -> f64 {
    mu / h * exp2_m1(x / w)
}

/// `f'(x) = ln2·μ/(w h) · 2^{x/w}`.
#[inline]
pub fn exp_cr_derivative(mu: f64, w: f64, h: f64, x: f64) -> f64 {
    LN_2 * mu / (w * h) * (x / w).exp2()
}

/// The `x` at which `f'(x) = s` (may be negative when `s < f'(0)`).
#[inline]
pub fn exp_cr_derivative_inverse(mu: f64, w: f64, h: f64, s: f64) -> f64 {
    w * (s / (LN_2 * mu / (w * h))).log2()
}

/// `2^x − 1` without cancellation near zero.
#[inline]
pub fn exp2_m1(x: f64) -> f64 {
    (x * LN_2).exp_m1()
}

/// Unscaled AMC curve: interpolated mode power divided by `h`, `+∞` past the top mode.
pub fn amc_upsilon(table: &AmcTable, h: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mut prev = Mode { rho: 0.0, p: 0.0 };
    for m in table.modes() {
        if r <= m.rho {
            let frac = (r - prev.rho) / (m.rho - prev.rho);
            return (prev.p + frac * (m.p - prev.p)) / h;
        }
        prev = *m;
    }
    f64::INFINITY
}
