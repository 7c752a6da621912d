use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::StrategyKind;
use crate::reputation::EtaPolicy;

/// A stake transfer injected by the scenario at a given round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub round: u64,
    pub from: u32,
    pub to: u32,
    pub amount: u64,
}

/// Scenario description, read from JSON. Field names match the published
/// schema in `scenarios/scenario.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Providers.
    pub l: u32,
    /// Collectors.
    pub n: u32,
    /// Governors.
    pub m: u32,
    /// `topology[i]` lists the collector ids connected to provider `i`, in
    /// slot order.
    pub topology: Vec<Vec<u32>>,
    pub strategies: Vec<StrategyKind>,
    pub stakes: Vec<u64>,
    /// Initial epoch threshold.
    #[serde(rename = "T")]
    pub epoch_threshold: u64,
    pub eta_policy: EtaPolicy,
    pub mu: f64,
    pub delta_rounds: u64,
    pub b_limit: usize,
    /// Transactions generated per provider per round.
    pub gen_rate: u32,
    pub invalid_fraction: f64,
    pub total_rounds: u64,
    /// Providers stop generating at this round; the remaining rounds drain
    /// resubmissions and carry-over. Defaults to `total_rounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_rounds: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stake_transfers: Vec<TransferSpec>,
    /// Fabricated transactions per Forger collector per round.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub forge_rate: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

fn check_probability(field: &'static str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("{p} is not a probability")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn gen_rounds(&self) -> u64 {
        self.gen_rounds.unwrap_or(self.total_rounds)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.l == 0 {
            return Err(invalid("l", "need at least one provider"));
        }
        if self.n == 0 {
            return Err(invalid("n", "need at least one collector"));
        }
        if self.m == 0 {
            return Err(invalid("m", "need at least one governor"));
        }
        if self.topology.len() != self.l as usize {
            return Err(invalid(
                "topology",
                format!("{} adjacency lists for l = {}", self.topology.len(), self.l),
            ));
        }
        for (i, slots) in self.topology.iter().enumerate() {
            if slots.is_empty() {
                return Err(invalid("topology", format!("provider {i} has no collectors")));
            }
            if let Some(c) = slots.iter().find(|&&c| c >= self.n) {
                return Err(invalid("topology", format!("provider {i} lists collector {c}, n = {}", self.n)));
            }
            if slots.iter().collect::<HashSet<_>>().len() != slots.len() {
                return Err(invalid("topology", format!("provider {i} lists a collector twice")));
            }
        }
        if self.strategies.len() != self.n as usize {
            return Err(invalid(
                "strategies",
                format!("{} strategies for n = {}", self.strategies.len(), self.n),
            ));
        }
        for s in &self.strategies {
            if let Some(q) = s.probability() {
                check_probability("strategies", q)?;
            }
        }
        if self.stakes.len() != self.m as usize {
            return Err(invalid("stakes", format!("{} entries for m = {}", self.stakes.len(), self.m)));
        }
        if self.stakes.iter().sum::<u64>() == 0 {
            return Err(invalid("stakes", "total stake is zero"));
        }
        if self.epoch_threshold == 0 {
            return Err(invalid("T", "must be at least 1"));
        }
        if let EtaPolicy::Fixed(eta) = self.eta_policy {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(invalid("eta_policy", format!("fixed eta must be positive, got {eta}")));
            }
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if self.b_limit == 0 {
            return Err(invalid("b_limit", "must be at least 1"));
        }
        check_probability("invalid_fraction", self.invalid_fraction)?;
        if self.total_rounds == 0 {
            return Err(invalid("total_rounds", "must be at least 1"));
        }
        if self.gen_rounds.is_some_and(|g| g > self.total_rounds) {
            return Err(invalid("gen_rounds", "exceeds total_rounds"));
        }
        for t in &self.stake_transfers {
            if t.from >= self.m || t.to >= self.m {
                return Err(invalid("stake_transfers", format!("governor out of range in {t:?}")));
            }
            if t.round >= self.total_rounds {
                return Err(invalid("stake_transfers", format!("round {} is past the run", t.round)));
            }
        }
        Ok(())
    }
}
