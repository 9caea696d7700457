//! Experiment configuration file (TOML) and its validation.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::contexts::{ContextDistribution, DistributionSpec};
use crate::diagnostics::DiagnosticsBudget;
use crate::env::random_unit_vector;
use crate::policies::{PolicyConfig, PolicyKind};
use crate::seed::{derived_rng, stream};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_REPS: usize = 10;

/// One `[[policies]]` entry. Unset hyperparameters take their defaults when
/// the experiment is resolved: `lambda_reg = 1`, `delta = 1/T`,
/// `v_scale = 1`, `sigma_assumed = sigma`, and for greedy a unit `theta0`
/// drawn from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_reg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_assumed: Option<f64>,
}

impl PolicyEntry {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            name: None,
            theta0: None,
            lambda_reg: None,
            delta: None,
            v_scale: None,
            sigma_assumed: None,
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.name().to_string())
    }
}

fn default_policies() -> Vec<PolicyEntry> {
    [PolicyKind::Greedy, PolicyKind::Linucb, PolicyKind::Lints]
        .into_iter()
        .map(PolicyEntry::new)
        .collect()
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_svg: bool,
    #[serde(default)]
    pub diagnostics: bool,
    pub spec: DistributionSpec,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_budget: Option<DiagnosticsBudget>,
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Config with the three default policies and no output directory.
    pub fn new(d: usize, k: usize, horizon: usize, spec: DistributionSpec) -> Self {
        Self {
            d,
            k,
            horizon,
            reps: DEFAULT_REPS,
            seed: 0,
            sigma: DEFAULT_SIGMA,
            output_dir: None,
            emit_svg: false,
            diagnostics: false,
            spec,
            policies: default_policies(),
            diagnostics_budget: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let path = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "<root>".to_string(),
            };
            config_err(path, message)
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.d == 0 {
            return Err(config_err("d", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(config_err("K", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(config_err("T", "must be at least 1"));
        }
        if self.reps == 0 {
            return Err(config_err("reps", "must be at least 1"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(config_err(
                "sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        self.spec
            .validate()
            .map_err(|e| config_err("spec", e.to_string()))?;
        if self.policies.is_empty() {
            return Err(config_err("policies", "at least one policy is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, (entry, cfg)) in self
            .policies
            .iter()
            .zip(self.resolve_policies())
            .enumerate()
        {
            let at = |key: &str| format!("policies[{i}].{key}");
            if !seen.insert(entry.label()) {
                return Err(config_err(
                    at("name"),
                    format!("duplicate policy name '{}'", entry.label()),
                ));
            }
            if let Some(th) = &entry.theta0 {
                if th.len() != self.d {
                    return Err(config_err(
                        at("theta0"),
                        format!("expected {} values, got {}", self.d, th.len()),
                    ));
                }
            }
            let checks: [(&str, bool, f64); 4] = [
                (
                    "lambda_reg",
                    cfg.lambda_reg.is_finite() && cfg.lambda_reg > 0.0,
                    cfg.lambda_reg,
                ),
                ("delta", cfg.delta > 0.0 && cfg.delta < 1.0, cfg.delta),
                (
                    "v_scale",
                    cfg.v_scale.is_finite() && cfg.v_scale > 0.0,
                    cfg.v_scale,
                ),
                (
                    "sigma_assumed",
                    cfg.sigma_assumed.is_finite() && cfg.sigma_assumed >= 0.0,
                    cfg.sigma_assumed,
                ),
            ];
            if let Some((key, _, v)) = checks.iter().find(|c| !c.1) {
                return Err(config_err(at(key), format!("out of range: {v}")));
            }
        }
        Ok(())
    }

    /// Resolves the context distribution for `d`.
    pub fn distribution(&self) -> Result<ContextDistribution, HarnessError> {
        ContextDistribution::new(&self.spec, self.d).map_err(|e| config_err("spec", e.to_string()))
    }

    /// Default greedy warm start: a unit vector drawn from the experiment seed.
    pub fn default_theta0(&self) -> DVector<f64> {
        random_unit_vector(self.d, &mut derived_rng(self.seed, &[stream::THETA0]))
    }

    /// Policy entries with every default filled in.
    pub fn resolve_policies(&self) -> Vec<PolicyConfig> {
        let theta0 = self.default_theta0();
        self.policies
            .iter()
            .map(|e| PolicyConfig {
                kind: e.kind,
                theta0: e
                    .theta0
                    .as_ref()
                    .map(|v| DVector::from_column_slice(v))
                    .unwrap_or_else(|| theta0.clone()),
                lambda_reg: e.lambda_reg.unwrap_or(1.0),
                delta: e.delta.unwrap_or(1.0 / (self.horizon.max(2) as f64)),
                v_scale: e.v_scale.unwrap_or(1.0),
                sigma_assumed: e.sigma_assumed.unwrap_or(self.sigma),
            })
            .collect()
    }
}
