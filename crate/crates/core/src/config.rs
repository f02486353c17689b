//! Pipeline thresholds and the plain-text `key = value` config file format.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::density::DEFAULT_DROP_RATIO;
use crate::pyramid::DEFAULT_STOP_THRESHOLD;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{key} must be {requirement}, got {value}")]
    OutOfRange {
        key: &'static str,
        requirement: &'static str,
        value: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
}

/// Where the top-down pass starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleSelection {
    /// The coarsest pyramid level.
    #[default]
    Fixed,
    /// The level preceding the first information-density drop.
    Density,
}

impl FromStr for ScaleSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "density" => Ok(Self::Density),
            other => Err(format!("unknown scale selection `{other}`")),
        }
    }
}

impl fmt::Display for ScaleSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Density => "density",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationConfig {
    /// Region-growing tolerance at the top level.
    pub delta: f64,
    /// Deviation threshold for refinement during descent.
    pub tau: f64,
    pub max_refine_iters: usize,
    pub stop_threshold: usize,
    pub drop_ratio: f64,
    pub scale_selection: ScaleSelection,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            delta: 15.0,
            tau: 25.0,
            max_refine_iters: 10,
            stop_threshold: DEFAULT_STOP_THRESHOLD,
            drop_ratio: DEFAULT_DROP_RATIO,
            scale_selection: ScaleSelection::Fixed,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    key,
                    requirement: "a finite value > 0",
                    value: v.to_string(),
                })
            }
        };
        positive("delta", self.delta)?;
        positive("tau", self.tau)?;
        if self.max_refine_iters == 0 {
            return Err(ConfigError::OutOfRange {
                key: "max_refine_iters",
                requirement: ">= 1",
                value: "0".into(),
            });
        }
        if self.stop_threshold == 0 {
            return Err(ConfigError::OutOfRange {
                key: "stop_threshold",
                requirement: ">= 1",
                value: "0".into(),
            });
        }
        if !(self.drop_ratio > 0.0 && self.drop_ratio < 1.0) {
            return Err(ConfigError::OutOfRange {
                key: "drop_ratio",
                requirement: "in (0, 1)",
                value: self.drop_ratio.to_string(),
            });
        }
        Ok(())
    }
}

/// Settings read from a config file. Absent keys stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub max_refine_iters: Option<usize>,
    pub stop_threshold: Option<usize>,
    pub drop_ratio: Option<f64>,
    pub scale_selection: Option<ScaleSelection>,
    pub theta: Option<f64>,
}

impl ConfigFile {
    /// Parses `key = value` lines. `#` starts a comment; `-` and `_` are interchangeable in keys.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let bad = || ConfigError::BadValue {
                line,
                key: key.clone(),
                value: value.to_owned(),
            };
            match key.as_str() {
                "delta" => cfg.delta = Some(value.parse().map_err(|_| bad())?),
                "tau" => cfg.tau = Some(value.parse().map_err(|_| bad())?),
                "max_refine_iters" => cfg.max_refine_iters = Some(value.parse().map_err(|_| bad())?),
                "stop_threshold" => cfg.stop_threshold = Some(value.parse().map_err(|_| bad())?),
                "drop_ratio" => cfg.drop_ratio = Some(value.parse().map_err(|_| bad())?),
                "scale_selection" => cfg.scale_selection = Some(value.parse().map_err(|_| bad())?),
                "theta" => cfg.theta = Some(value.parse().map_err(|_| bad())?),
                _ => return Err(ConfigError::UnknownKey { line, key }),
            }
        }
        Ok(cfg)
    }
}
