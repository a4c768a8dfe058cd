//! Mode tables for square M-QAM under a symbol-error-probability target.

use serde::{Deserialize, Serialize};

use crate::costreward::{AmcTable, Mode};
use crate::error::{invalid, Error, Result};

/// Constellation sizes and the SEP every mode must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QamSpec {
    pub constellations: Vec<u32>,
    pub sep_target: f64,
}

/// Gaussian tail `Q(x) = erfc(x/√2)/2`, accurate to a few ulps via `libm::erfc`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn check_constellation(m: u32) -> Result<f64> {
    let root = (m as f64).sqrt().round();
    if m < 4 || (root as u64) * (root as u64) != m as u64 {
        return invalid(format!(
            "constellation size must be a perfect square ≥ 4, got {m}"
        ));
    }
    Ok(root)
}

/// Symbol error probability of square M-QAM at received SNR `snr` (linear).
pub fn qam_sep(m: u32, snr: f64) -> Result<f64> {
    let root = check_constellation(m)?;
    if !(snr >= 0.0) {
        return invalid(format!("SNR must be non-negative, got {snr}"));
    }
    let x = (3.0 * snr / (m as f64 - 1.0)).sqrt();
    let p = 2.0 * (1.0 - 1.0 / root) * q_function(x);
    Ok(p * (2.0 - p))
}

/// Smallest SNR at which `qam_sep(m, snr) ≤ sep`, by bisection to full precision.
pub fn min_snr_for_sep(m: u32, sep: f64) -> Result<f64> {
    let ceiling = qam_sep(m, 0.0)?;
    if !(sep > 0.0 && sep < ceiling) {
        return invalid(format!(
            "SEP target must lie in (0, {ceiling}) for {m}-QAM, got {sep}"
        ));
    }
    let f = |snr: f64| qam_sep(m, snr).map(|p| p - sep);
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return invalid("SEP target too small to invert");
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Mode table `(log2 M, min SNR)` for each constellation, in increasing size.
pub fn build_mode_table(spec: &QamSpec) -> Result<AmcTable> {
    if !(spec.sep_target > 0.0 && spec.sep_target < 1.0) {
        return invalid(format!(
            "SEP target must lie in (0, 1), got {}",
            spec.sep_target
        ));
    }
    if spec.constellations.is_empty() {
        return Err(Error::Empty("constellation list"));
    }
    let mut sizes = spec.constellations.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let modes = sizes
        .iter()
        .map(|&m| {
            Ok(Mode {
                rho: (m as f64).log2(),
                p: min_snr_for_sep(m, spec.sep_target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AmcTable::new(modes).map_err(|e| {
        Error::InvalidParameter(format!(
            "constellations {:?} at SEP {} do not give a convex mode curve: {e}",
            sizes, spec.sep_target
        ))
    })
}

pub fn table_to_json(table: &AmcTable) -> String {
    serde_json::to_string_pretty(table).expect("mode tables always serialize")
}

pub fn table_from_json(text: &str) -> Result<AmcTable> {
    serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("mode table: {e}")))
}
