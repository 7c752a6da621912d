//! Exact expected loss for small screening instances.
//!
//! The reputation vector after each transaction depends only on which slot
//! was drawn: a slot labeled −1 (or absent) leaves every reputation alone, a
//! slot labeled +1 triggers verification and the deterministic penalty
//! vector. Propagating the distribution over reachable reputation vectors
//! transaction by transaction yields exact expectations. This module does not
//! use the reputation engine so it can serve as an independent reference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::regret::hedge_bound;
use crate::types::Label;

pub const MAX_SLOTS: usize = 3;
pub const MAX_TRANSACTIONS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large: u = {slots}, T = {transactions} (limits u <= {MAX_SLOTS}, T <= {MAX_TRANSACTIONS})")]
    TooLarge { slots: usize, transactions: usize },
    #[error("instance is malformed: {0}")]
    Malformed(String),
}

/// A small instance. Labels are coded `1` (+1), `-1` (−1) and `0` (absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub labels: Vec<Vec<i8>>,
    pub validity: Vec<bool>,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_reps: Option<Vec<i64>>,
}

impl OracleInstance {
    pub fn from_labels(labels: &[Vec<Option<Label>>], validity: Vec<bool>, eta: f64) -> Self {
        let code = |l: &Option<Label>| match l {
            Some(Label::Plus) => 1,
            Some(Label::Minus) => -1,
            None => 0,
        };
        Self {
            labels: labels.iter().map(|row| row.iter().map(code).collect()).collect(),
            validity,
            eta,
            initial_reps: None,
        }
    }

    pub fn label_rows(&self) -> Vec<Vec<Option<Label>>> {
        self.labels
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| match c {
                        1 => Some(Label::Plus),
                        -1 => Some(Label::Minus),
                        _ => None,
                    })
                    .collect()
            })
            .collect()
    }

    pub fn slots(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    pub fn transactions(&self) -> usize {
        self.labels.len()
    }

    fn check(&self) -> Result<(), OracleError> {
        let (u, t) = (self.slots(), self.transactions());
        if u > MAX_SLOTS || t > MAX_TRANSACTIONS {
            return Err(OracleError::TooLarge {
                slots: u,
                transactions: t,
            });
        }
        if t == 0 || u == 0 {
            return Err(OracleError::Malformed("need at least one transaction and one slot".into()));
        }
        if self.labels.iter().any(|row| row.len() != u) {
            return Err(OracleError::Malformed("label rows differ in length".into()));
        }
        if self.labels.iter().flatten().any(|c| !matches!(c, -1..=1)) {
            return Err(OracleError::Malformed("labels must be 1, -1 or 0".into()));
        }
        if self.validity.len() != t {
            return Err(OracleError::Malformed(format!(
                "{} validity entries for {t} transactions",
                self.validity.len()
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(OracleError::Malformed(format!("eta must be positive, got {}", self.eta)));
        }
        if let Some(reps) = &self.initial_reps {
            if reps.len() != u || reps.iter().any(|&r| r > 0) {
                return Err(OracleError::Malformed("initial_reps must be u nonpositive integers".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Expected proof-consistent loss `E[Σ_t -Σ_k p_k Δr_k]`.
    pub expected_loss: f64,
    /// Expected number of invalid transactions verified.
    pub expected_wasted: f64,
    /// Expected penalty count per slot.
    pub expected_slot_losses: Vec<f64>,
    pub min_slot_loss: f64,
    pub regret: f64,
    pub bound: f64,
}

fn weights(reps: &[i64], eta: f64) -> Vec<f64> {
    let raw: Vec<f64> = reps.iter().map(|&r| (eta * r as f64).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn exact_expected_loss(instance: &OracleInstance) -> Result<OracleResult, OracleError> {
    instance.check()?;
    let u = instance.slots();
    let start = instance.initial_reps.clone().unwrap_or_else(|| vec![0; u]);
    let mut dist: BTreeMap<Vec<i64>, f64> = BTreeMap::from([(start, 1.0)]);
    let mut expected_loss = 0.0;
    let mut expected_wasted = 0.0;
    let mut slot_losses = vec![0.0; u];

    for (row, &valid) in instance.labels.iter().zip(&instance.validity) {
        let penalty: Vec<i64> = row
            .iter()
            .map(|&c| {
                let plus = c == 1;
                i64::from(if valid { !plus } else { plus })
            })
            .collect();
        let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (reps, mass) in dist {
            let p = weights(&reps, instance.eta);
            let verify_mass: f64 = p
                .iter()
                .zip(row)
                .filter(|(_, &c)| c == 1)
                .map(|(pk, _)| pk)
                .sum();
            let skip_mass = 1.0 - verify_mass;
            if verify_mass > 0.0 {
                let step_loss: f64 = p.iter().zip(&penalty).map(|(pk, &w)| pk * w as f64).sum();
                expected_loss += mass * verify_mass * step_loss;
                if !valid {
                    expected_wasted += mass * verify_mass;
                }
                for (s, &w) in slot_losses.iter_mut().zip(&penalty) {
                    *s += mass * verify_mass * w as f64;
                }
                let moved: Vec<i64> = reps.iter().zip(&penalty).map(|(r, w)| r - w).collect();
                *next.entry(moved).or_insert(0.0) += mass * verify_mass;
            }
            if skip_mass > 0.0 {
                *next.entry(reps).or_insert(0.0) += mass * skip_mass;
            }
        }
        dist = next;
    }

    let min_slot_loss = slot_losses.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OracleResult {
        regret: expected_loss - min_slot_loss,
        bound: hedge_bound(u, instance.eta, instance.transactions() as u64),
        expected_loss,
        expected_wasted,
        expected_slot_losses: slot_losses,
        min_slot_loss,
    })
}
