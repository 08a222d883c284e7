//! JSON run configuration.
//!
//! ```json
//! {
//!   "objective": "ackley",
//!   "dimension": 2,
//!   "bounds": [[-32.768, 32.768], [-32.768, 32.768]],
//!   "particles": 6,
//!   "iterations": 200,
//!   "runs": 400,
//!   "seed": 0,
//!   "variant": "both",
//!   "params": { "omega0": 0.72984, "c1_0": 2.8, "c2_0": 2.05, "vmax0": 2.0,
//!               "S": 52, "tau": 1.2, "gamma_floor": 1e-12 }
//! }
//! ```
//!
//! Only `objective` is required. Unknown keys are rejected. Omitted bounds
//! are the objective's default box, omitted `particles` is the number of
//! points a quadratic in `dimension` variables needs, and omitted parameters
//! take the values of [`SwarmParams::default`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::BatchSpec;
use crate::objectives::{BenchmarkKind, Bounds};
use crate::surrogate::required_points;
use crate::swarm::{SwarmConfig, SwarmError, SwarmParams, Variant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read configuration {path}: {message}")]
    Read { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.to_string(),
        }
    }

    /// The offending key, when the error concerns one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Read { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Standard,
    Qs,
    #[default]
    Both,
}

impl VariantChoice {
    /// Surrogate variant first, so comparisons read left to right.
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Standard => vec![Variant::Standard],
            VariantChoice::Qs => vec![Variant::QuadraticSurrogate],
            VariantChoice::Both => vec![Variant::QuadraticSurrogate, Variant::Standard],
        }
    }
}

impl std::str::FromStr for VariantChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "both" => Ok(VariantChoice::Both),
            other => match other.parse::<Variant>() {
                Ok(Variant::Standard) => Ok(VariantChoice::Standard),
                Ok(Variant::QuadraticSurrogate) => Ok(VariantChoice::Qs),
                Err(_) => Err(format!("unknown variant `{other}`; expected `standard`, `qs` or `both`")),
            },
        }
    }
}

fn default_dimension() -> usize {
    2
}

fn default_iterations() -> usize {
    200
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub objective: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub variant: VariantChoice,
    #[serde(default)]
    pub params: SwarmParams,
}

impl RunConfigFile {
    pub fn new(objective: impl Into<String>) -> Self {
        Self {
            objective: objective.into(),
            dimension: default_dimension(),
            bounds: None,
            particles: None,
            iterations: default_iterations(),
            runs: default_runs(),
            seed: 0,
            variant: VariantChoice::default(),
            params: SwarmParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = match e.path().to_string() {
                p if p == "." => named_field(e.inner()).unwrap_or(p),
                p => p,
            };
            ConfigError::invalid(key, e.inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Validate and fill in every defaulted value, so that the result
    /// serializes to a self-contained description of the run.
    pub fn resolve(&self) -> Result<Self, ConfigError> {
        let kind: BenchmarkKind = self
            .objective
            .parse()
            .map_err(|e| ConfigError::invalid("objective", e))?;
        if self.dimension == 0 {
            return Err(ConfigError::invalid("dimension", "must be at least 1"));
        }
        let bounds = match &self.bounds {
            Some(b) if b.dimension() != self.dimension => {
                return Err(ConfigError::invalid(
                    "bounds",
                    format!("has {} intervals but dimension is {}", b.dimension(), self.dimension),
                ))
            }
            Some(b) => b.clone(),
            None => Bounds::symmetric(self.dimension, kind.default_half_width())
                .map_err(|e| ConfigError::invalid("bounds", e))?,
        };
        let particles = match self.particles {
            Some(p) => p,
            None => required_points(self.dimension).map_err(|e| ConfigError::invalid("dimension", e))?,
        };
        if self.runs == 0 {
            return Err(ConfigError::invalid("runs", "must be at least 1"));
        }
        let mut probe = SwarmConfig::new(bounds.clone(), particles, self.iterations, Variant::Standard, self.seed);
        probe.params = self.params;
        if let Err(SwarmError::InvalidConfig { field, reason }) = probe.validate() {
            let key = match field {
                "particles" | "iterations" => field.to_string(),
                other => format!("params.{other}"),
            };
            return Err(ConfigError::invalid(key, reason));
        }
        Ok(Self {
            objective: kind.name().to_string(),
            bounds: Some(bounds),
            particles: Some(particles),
            ..self.clone()
        })
    }

    /// Batch description of a resolved configuration.
    pub fn batch_spec(&self, jobs: usize) -> Result<BatchSpec, ConfigError> {
        let r = self.resolve()?;
        Ok(BatchSpec {
            objective: r.objective,
            bounds: r.bounds.expect("resolved"),
            variants: r.variant.variants(),
            runs: r.runs,
            iterations: r.iterations,
            particles: r.particles.expect("resolved"),
            params: r.params,
            base_seed: r.seed,
            jobs,
        })
    }
}

/// Errors at the document root (a missing field, or an unknown one that
/// the path does not capture) name the key only in the message.
fn named_field(err: &serde_json::Error) -> Option<String> {
    let msg = err.to_string();
    let rest = msg
        .strip_prefix("unknown field `")
        .or_else(|| msg.strip_prefix("missing field `"))?;
    Some(rest[..rest.find('`')?].to_string())
}
