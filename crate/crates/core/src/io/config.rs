//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! n_examples = 300
//! sigma_z    = 1.5e1      # trailing comments are allowed
//! scale      = log
//! snr_grid   = 10, 2.04, 0.5
//! ```
//!
//! One key per line, blank lines ignored. Unknown and repeated keys are
//! errors. Missing keys take the reference defaults; a missing `sigma_c` or
//! `sigma_e` is derived from `n_weights` as `1/sqrt(D)` and `0.7/sqrt(D)`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::experiments::{GridScale, SigmaEMode, SweepSpec, DEFAULT_SNR_GRID};
use crate::params::ModelParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    DuplicateKey {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("{}invalid `{key}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid {
        line: Option<usize>,
        key: String,
        reason: String,
    },
}

pub const KEYS: &[&str] = &[
    "n_examples",
    "n_classes",
    "n_weights",
    "sigma_z",
    "sigma_c",
    "sigma_e",
    "length_beta",
    "target_accuracy",
    "seed",
    "hyperplane_dim",
    "sigma_z_min",
    "sigma_z_max",
    "points",
    "scale",
    "gamma",
    "sigma_z_ref",
    "repeats",
    "sigma_e_mode",
    "output_dir",
    "emit_svg",
    "outlier_tau",
    "outlier_candidates",
    "snr_grid",
];

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub sweep: SweepSpec,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub outlier_tau: f64,
    pub outlier_candidates: Option<usize>,
    pub snr_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            sweep: SweepSpec::default(),
            output_dir: PathBuf::from("out"),
            emit_svg: false,
            outlier_tau: 2.0,
            outlier_candidates: None,
            snr_grid: DEFAULT_SNR_GRID.to_vec(),
        }
    }
}

impl RunConfig {
    /// Validate the model and sweep parameters and the outlier settings.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.sweep.validate()?;
        if !(self.outlier_tau.is_finite() && self.outlier_tau > 0.0) {
            return Err(Error::param("outlier_tau", "must be positive"));
        }
        if self.outlier_candidates == Some(0) {
            return Err(Error::param("outlier_candidates", "must be at least 1"));
        }
        if self.snr_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::param("snr_grid", "entries must be positive"));
        }
        Ok(())
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_config_str(&text)?)
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: format!("{value:?}: {e}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.into(),
            reason: format!("{value:?} is not a boolean"),
        }),
    }
}

fn parse_choice<T: Copy>(line: usize, key: &str, value: &str, choices: &[(&str, T)]) -> Result<T, ConfigError> {
    choices
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| ConfigError::BadValue {
            line,
            key: key.into(),
            reason: format!(
                "{value:?} is not one of {}",
                choices.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if let Some(&first) = seen.get(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first,
            });
        }
        seen.insert(key.to_string(), line);

        let p = &mut cfg.params;
        let s = &mut cfg.sweep;
        match key {
            "n_examples" => p.n_examples = parse(line, key, value)?,
            "n_classes" => p.n_classes = parse(line, key, value)?,
            "n_weights" => p.n_weights = parse(line, key, value)?,
            "sigma_z" => p.sigma_z = parse(line, key, value)?,
            "sigma_c" => p.sigma_c = parse(line, key, value)?,
            "sigma_e" => p.sigma_e = parse(line, key, value)?,
            "length_beta" => p.length_beta = parse(line, key, value)?,
            "target_accuracy" => p.target_accuracy = parse(line, key, value)?,
            "seed" => p.seed = parse(line, key, value)?,
            "hyperplane_dim" => p.hyperplane_dim = parse(line, key, value)?,
            "sigma_z_min" => s.sigma_z_min = parse(line, key, value)?,
            "sigma_z_max" => s.sigma_z_max = parse(line, key, value)?,
            "points" => s.points = parse(line, key, value)?,
            "scale" => {
                s.scale = parse_choice(
                    line,
                    key,
                    value,
                    &[("log", GridScale::Log), ("linear", GridScale::Linear)],
                )?
            }
            "gamma" => s.gamma = parse(line, key, value)?,
            "sigma_z_ref" => s.sigma_z_ref = parse(line, key, value)?,
            "repeats" => s.repeats = parse(line, key, value)?,
            "sigma_e_mode" => {
                s.sigma_e_mode = parse_choice(
                    line,
                    key,
                    value,
                    &[("scaled", SigmaEMode::Scaled), ("fixed", SigmaEMode::Fixed)],
                )?
            }
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "emit_svg" => cfg.emit_svg = parse_bool(line, key, value)?,
            "outlier_tau" => cfg.outlier_tau = parse(line, key, value)?,
            "outlier_candidates" => cfg.outlier_candidates = Some(parse(line, key, value)?),
            "snr_grid" => {
                cfg.snr_grid = value
                    .split(',')
                    .map(|v| parse(line, key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }

    let root = (cfg.params.n_weights.max(1) as f64).sqrt();
    if !seen.contains_key("sigma_c") {
        cfg.params.sigma_c = 1.0 / root;
    }
    if !seen.contains_key("sigma_e") {
        cfg.params.sigma_e = 0.7 / root;
    }

    cfg.validate().map_err(|e| match e {
        Error::InvalidParam { name, reason } => ConfigError::Invalid {
            line: seen.get(name).copied(),
            key: name.to_string(),
            reason,
        },
        other => ConfigError::Invalid {
            line: None,
            key: String::new(),
            reason: other.to_string(),
        },
    })?;
    Ok(cfg)
}
