//! JSON experiment configuration and its conversion to normalized units.

use serde::{Deserialize, Serialize};

use crate::amc::{build_mode_table, QamSpec};
use crate::channel::{ChannelModel, Fading};
use crate::costreward::{AmcTable, UserProfile};
use crate::error::{invalid, Error, Result};
use crate::experiments::{Constraint, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodebookConfig {
    Infinite,
    /// Explicit `(rho, p)` mode list.
    Amc {
        table: AmcTable,
    },
    /// Square QAM constellations at a symbol-error target.
    Qam {
        constellations: Vec<u32>,
        sep: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingConfig {
    Rayleigh,
    Constant,
    /// `(gain, probability)` atoms, in normalized units.
    Discrete {
        points: Vec<(f64, f64)>,
    },
}

fn one() -> f64 {
    1.0
}

fn rayleigh() -> FadingConfig {
    FadingConfig::Rayleigh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    #[serde(default = "one")]
    pub w: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// Average received SNR `h̄/(N₀B)` in dB.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Normalized mean gain; alternative to `snr_db`.
    #[serde(default)]
    pub mean_gain: Option<f64>,
    #[serde(default = "rayleigh")]
    pub fading: FadingConfig,
    pub codebook: CodebookConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintConfig {
    WeightedSum { rate: f64 },
    Individual { rates: Vec<f64> },
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub users: Vec<UserConfig>,
    pub constraint: ConstraintConfig,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: SolverOptions,
    /// When set, rates are read in bits/s and divided by this bandwidth.
    #[serde(default)]
    pub bandwidth_hz: Option<f64>,
    /// Noise power spectral density in W/Hz, used only to report powers in watts.
    #[serde(default)]
    pub noise_density: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Empty("users"));
        }
        if self.samples == 0 {
            return invalid("samples must be positive");
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_density", self.noise_density),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return invalid(format!("{name} must be positive, got {v}"));
                }
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            match (&u.fading, u.snr_db, u.mean_gain) {
                (FadingConfig::Discrete { .. }, None, None) => {}
                (FadingConfig::Discrete { .. }, _, _) => {
                    return invalid(format!(
                        "users[{i}]: discrete fading takes no snr_db or mean_gain"
                    ))
                }
                (_, Some(_), Some(_)) => {
                    return invalid(format!("users[{i}]: give snr_db or mean_gain, not both"))
                }
                (_, None, None) => {
                    return invalid(format!("users[{i}]: missing snr_db or mean_gain"))
                }
                _ => {}
            }
        }
        self.constraint().validate(self.users.len())
    }

    fn rate_scale(&self) -> f64 {
        self.bandwidth_hz.map_or(1.0, |b| 1.0 / b)
    }

    /// Constraint in bits/s/Hz.
    pub fn constraint(&self) -> Constraint {
        let s = self.rate_scale();
        match &self.constraint {
            ConstraintConfig::WeightedSum { rate } => Constraint::WeightedSum { rate: rate * s },
            ConstraintConfig::Individual { rates } => Constraint::Individual {
                rates: rates.iter().map(|r| r * s).collect(),
            },
        }
    }

    pub fn profiles(&self) -> Result<Vec<UserProfile>> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let p = match &u.codebook {
                    CodebookConfig::Infinite => UserProfile::infinite(u.w, u.mu),
                    CodebookConfig::Amc { table } => UserProfile::amc(u.w, u.mu, table.clone()),
                    CodebookConfig::Qam {
                        constellations,
                        sep,
                    } => build_mode_table(&QamSpec {
                        constellations: constellations.clone(),
                        sep_target: *sep,
                    })
                    .and_then(|t| UserProfile::amc(u.w, u.mu, t)),
                };
                p.map_err(|e| Error::InvalidParameter(format!("users[{i}]: {e}")))
            })
            .collect()
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        let fading = self
            .users
            .iter()
            .map(|u| {
                let mean = u.mean_gain.or(u.snr_db.map(|db| 10f64.powf(db / 10.0)));
                match (&u.fading, mean) {
                    (FadingConfig::Rayleigh, Some(m)) => Fading::RayleighPower { mean_gain: m },
                    (FadingConfig::Constant, Some(m)) => Fading::Constant { gain: m },
                    (FadingConfig::Discrete { points }, _) => Fading::Discrete {
                        points: points.clone(),
                    },
                    // rejected by validate
                    (_, None) => Fading::Constant { gain: f64::NAN },
                }
            })
            .collect();
        ChannelModel::new(fading)
    }

    /// Factor turning a normalized average power into watts, if known.
    pub fn watts_per_unit(&self) -> Option<f64> {
        Some(self.noise_density? * self.bandwidth_hz?)
    }
}
