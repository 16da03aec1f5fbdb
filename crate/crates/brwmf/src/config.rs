//! Experiment configuration files and run manifests.
//!
//! Configs are TOML with strict parsing: unknown keys are rejected with the
//! offending key named, and every constraint violation names the field. The
//! config hash is taken over the canonical serialization of the *parsed*
//! struct, so two files differing only in key order hash identically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::ModelSpec;
use crate::pressure::QGrid;
use crate::tree::DEFAULT_NODE_BUDGET;
use crate::{BrwError, Result};

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pressure,
    Cascade,
    Spectrum,
    Domains,
    Full,
}

/// A box grid specification: per-axis bounds and resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub per_axis: usize,
}

impl GridSpec {
    pub fn build(&self, d: usize) -> QGrid {
        QGrid::uniform_box(d, self.min, self.max, self.per_axis)
    }
}

/// Pinned tolerances for a run's pass/fail summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `max_q |P_n(q) − P̃(q)|` at the final depth.
    pub pressure_gap: f64,
    /// Finite-n slack for the one-sided bound `P_n ≤ P̃ + slack`, `n ≥ 15`.
    pub pressure_upper_slack: f64,
    /// `max |L_n(q,λ) − (P̃(q+λ) − P̃(q))|`.
    pub l_gap: f64,
    /// Spectrum estimators against the analytic `P̃*`.
    pub spectrum_gap: f64,
    /// Relative error of the exact branching/additivity identities.
    pub identity_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pressure_gap: 0.05,
            pressure_upper_slack: 0.1,
            l_gap: 0.05,
            spectrum_gap: 0.1,
            identity_rel: 1e-12,
        }
    }
}

fn default_replicas() -> usize {
    1
}
fn default_budget() -> usize {
    DEFAULT_NODE_BUDGET
}
fn default_paths() -> usize {
    100
}
fn default_epsilons() -> Vec<f64> {
    vec![0.025, 0.05, 0.1]
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    /// Tree depth `n`.
    pub depth: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub master_seed: u64,
    pub q_grid: GridSpec,
    /// α grid for spectrum histograms; defaults to the image `∇P̃(q_grid)`.
    #[serde(default)]
    pub alpha_grid: Option<GridSpec>,
    /// Ball radii for level-set counts; the first is the primary ε.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// λ box for the cascade moment generating function scan.
    #[serde(default)]
    pub lambda_grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    /// Per-level node budget.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Depth of the materialized cascade (defaults to `depth`).
    #[serde(default)]
    pub cascade_depth: Option<usize>,
    /// First level of the LDP slope fit (defaults to `depth − 8`).
    #[serde(default)]
    pub fit_from: Option<usize>,
    /// Sampled paths per q for local dimensions.
    #[serde(default = "default_paths")]
    pub paths: usize,
}

impl ExperimentConfig {
    /// Constraint validation; every message names the offending key.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.depth < 1 {
            return Err(BrwError::Config("depth must be >= 1".into()));
        }
        if self.replicas < 1 {
            return Err(BrwError::Config("replicas must be >= 1".into()));
        }
        if self.q_grid.per_axis == 0 {
            return Err(BrwError::Config("q_grid.per_axis must be >= 1".into()));
        }
        if self.q_grid.max < self.q_grid.min {
            return Err(BrwError::Config("q_grid: max must be >= min".into()));
        }
        if self.epsilons.is_empty() {
            return Err(BrwError::Config("epsilons must be non-empty".into()));
        }
        if self.epsilons.iter().any(|e| *e <= 0.0) {
            return Err(BrwError::Config("epsilons must be positive".into()));
        }
        if let Some(cd) = self.cascade_depth {
            if cd < 1 || cd > self.depth {
                return Err(BrwError::Config(
                    "cascade_depth must lie in 1..=depth".into(),
                ));
            }
        }
        if let Some(from) = self.fit_from {
            if from < 1 || from > self.depth {
                return Err(BrwError::Config("fit_from must lie in 1..=depth".into()));
            }
        }
        if self.paths == 0 {
            return Err(BrwError::Config("paths must be >= 1".into()));
        }
        Ok(())
    }

    /// Hash of the canonical serialization; stable under key reordering of
    /// the source file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn effective_cascade_depth(&self) -> usize {
        self.cascade_depth.unwrap_or(self.depth)
    }

    pub fn effective_fit_from(&self) -> usize {
        self.fit_from.unwrap_or(self.depth.saturating_sub(8).max(1))
    }
}

/// Strict parse of a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Strict parse of config text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| BrwError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// One pass/fail line of a run's summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Provenance record written next to a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub toolkit_version: String,
    pub master_seed: u64,
    /// RNG stream id per replica, derived as `(master_seed, replica index)`.
    pub replica_streams: Vec<u64>,
    pub wall_clock_secs: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    /// Set when the run stopped early (budget exhaustion).
    pub incomplete: bool,
    /// Dropped or non-converged points, never silent.
    pub flagged: Vec<String>,
}
