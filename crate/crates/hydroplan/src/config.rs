//! The `params.json` run configuration: one document carrying dimensions,
//! economics, estimation settings, boundary values, game parameters,
//! integrator settings, seed, and optional input paths.
//!
//! Every field has a default, so a partial document is valid. Keys
//! serialize in declaration order; `docs/formats.md` is the format
//! reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::EconomicParams;
use crate::error::{Error, Result};
use crate::markov::validate_distribution;
use crate::state_space::{count_states, ProblemDims};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DimsConfig {
    pub resources: usize,
    pub users: usize,
    pub stages: usize,
}

impl Default for DimsConfig {
    fn default() -> Self {
        Self {
            resources: 2,
            users: 3,
            stages: 12,
        }
    }
}

impl DimsConfig {
    pub fn to_dims(&self) -> Result<ProblemDims> {
        ProblemDims::new(self.resources, self.users, self.stages)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub payoff_a: f64,
    pub payoff_b: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            payoff_a: 2.0,
            payoff_b: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    pub grid: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            horizon: 200.0,
            grid: 50,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub observations: Option<String>,
    pub model: Option<String>,
    pub truth_model: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub description: Option<String>,
    pub dims: DimsConfig,
    pub resource_names: Option<Vec<String>>,
    pub user_names: Option<Vec<String>>,
    pub economic: EconomicParams,
    pub smoothing_alpha: f64,
    pub stationary: bool,
    /// Boundary values per state; `null` means zero everywhere.
    pub terminal_values: Option<Vec<f64>>,
    /// Stage-1 distribution; `null` falls back to the empirical stage-1
    /// frequency of the observation log when one is supplied, else uniform.
    pub initial_distribution: Option<Vec<f64>>,
    pub game: GameConfig,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dims = DimsConfig::default();
        Self {
            description: None,
            economic: default_economic(&dims),
            dims,
            resource_names: None,
            user_names: None,
            smoothing_alpha: 1.0,
            stationary: false,
            terminal_values: None,
            initial_distribution: None,
            game: GameConfig::default(),
            integrator: IntegratorConfig::default(),
            seed: 1,
            paths: PathsConfig::default(),
        }
    }
}

fn default_economic(dims: &DimsConfig) -> EconomicParams {
    EconomicParams {
        reward: vec![vec![1.0; dims.users]; dims.resources],
        unit_cost: vec![vec![1.0; dims.users]; dims.resources],
        cap: vec![vec![None; dims.users]; dims.resources],
        demand: vec![vec![1.0; dims.stages]; dims.users],
        availability: vec![vec![1.0; dims.stages]; dims.resources],
        shortfall_penalty: 10.0,
        min_active_allocation: 0.0,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })
    }

    pub fn dims(&self) -> Result<ProblemDims> {
        self.dims.to_dims()
    }

    /// Number of feasible states for the configured dimensions.
    pub fn state_count(&self) -> Result<usize> {
        Ok(count_states(self.dims()?) as usize)
    }

    /// Cross-checks every field that has shape constraints.
    pub fn validate(&self) -> Result<()> {
        let dims = self.dims()?;
        self.economic.validate(&dims)?;
        if !self.smoothing_alpha.is_finite() || self.smoothing_alpha < 0.0 {
            return Err(Error::Domain {
                what: "smoothing_alpha",
                detail: format!("must be finite and nonnegative, got {}", self.smoothing_alpha),
            });
        }
        let l = count_states(dims) as usize;
        if let Some(terminal) = &self.terminal_values {
            if terminal.len() != l {
                return Err(Error::Dimension {
                    what: "terminal_values",
                    detail: format!("expected {l} entries, got {}", terminal.len()),
                });
            }
            if terminal.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain {
                    what: "terminal_values",
                    detail: "entries must be finite".to_string(),
                });
            }
        }
        if let Some(initial) = &self.initial_distribution {
            validate_distribution(initial, l)?;
        }
        if let Some(names) = &self.resource_names {
            if names.len() != dims.resources {
                return Err(Error::Dimension {
                    what: "resource_names",
                    detail: format!("expected {} entries", dims.resources),
                });
            }
        }
        if let Some(names) = &self.user_names {
            if names.len() != dims.users {
                return Err(Error::Dimension {
                    what: "user_names",
                    detail: format!("expected {} entries", dims.users),
                });
            }
        }
        Ok(())
    }

    /// Terminal boundary values, defaulting to zero for every state.
    pub fn terminal(&self, l: usize) -> Vec<f64> {
        self.terminal_values.clone().unwrap_or_else(|| vec![0.0; l])
    }

    pub fn resource_labels(&self, m: usize) -> Vec<String> {
        self.resource_names
            .clone()
            .unwrap_or_else(|| (1..=m).map(|i| format!("resource_{i}")).collect())
    }

    pub fn user_labels(&self, n: usize) -> Vec<String> {
        self.user_names
            .clone()
            .unwrap_or_else(|| (1..=n).map(|j| format!("user_{j}")).collect())
    }
}
