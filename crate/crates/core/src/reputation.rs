//! Hedge-style reputation engine.
//!
//! Each provider keeps one nonpositive integer reputation per connected
//! collector slot. Selection probabilities are a softmax with learning rate
//! `eta`; a verified transaction penalises every slot whose label disagrees
//! with the verdict. After `epoch_threshold` verified transactions revenue is
//! split by a softmax with parameter `mu`, reputations reset to zero, the
//! threshold doubles and `eta` is re-tuned.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, Encoder};
use crate::types::Label;

#[derive(Debug, Error, PartialEq)]
pub enum ReputationError {
    #[error("provider has no connected collectors")]
    NoCollectors,
    #[error("rate parameter must be positive and finite, got {0}")]
    InvalidRate(f64),
}

/// How the learning rate is chosen per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EtaPolicy {
    /// `sqrt(ln u / T_i)`, recomputed at each doubling.
    PerEpochSqrt,
    Fixed(f64),
}

impl EtaPolicy {
    pub fn eta_for(&self, slots: usize, threshold: u64) -> f64 {
        match *self {
            EtaPolicy::Fixed(eta) => eta,
            EtaPolicy::PerEpochSqrt => tuned_eta(slots, threshold),
        }
    }
}

/// `sqrt(ln u / T)`. With a single slot `ln u = 0` and the softmax is trivial,
/// so `sqrt(1 / T)` is used to keep the rate positive.
pub fn tuned_eta(slots: usize, threshold: u64) -> f64 {
    let log_u = if slots >= 2 { (slots as f64).ln() } else { 1.0 };
    (log_u / threshold as f64).sqrt()
}

/// Governor verdict on a verified transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

impl Verdict {
    pub fn from_validity(valid: bool) -> Self {
        if valid {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    }
}

fn softmax(reps: &[i64], rate: f64) -> Result<Vec<f64>, ReputationError> {
    if reps.is_empty() {
        return Err(ReputationError::NoCollectors);
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ReputationError::InvalidRate(rate));
    }
    let max = *reps.iter().max().expect("nonempty");
    let weights: Vec<f64> = reps
        .iter()
        .map(|&r| (rate * (r - max) as f64).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Probability of drawing each slot: `exp(eta r_k) / sum_j exp(eta r_j)`.
pub fn selection_probabilities(reps: &[i64], eta: f64) -> Result<Vec<f64>, ReputationError> {
    softmax(reps, eta)
}

/// Inverse-CDF draw over the slots in canonical order.
pub fn draw_collector<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = k;
        }
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    // Rounding can leave the total a hair under 1.
    last_positive
}

/// Revenue split for one epoch; the epoch's profit is one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub epoch_index: u32,
    pub shares: Vec<f64>,
}

pub fn revenue_shares(reps: &[i64], mu: f64) -> Result<Vec<f64>, ReputationError> {
    softmax(reps, mu)
}

/// Per-provider reputation vector and epoch counters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationState {
    reps: Vec<i64>,
    cnt: u64,
    epoch_threshold: u64,
    initial_threshold: u64,
    eta: f64,
    epoch_index: u32,
    policy: EtaPolicy,
}

impl ReputationState {
    pub fn new(slots: usize, initial_threshold: u64, policy: EtaPolicy) -> Result<Self, ReputationError> {
        if slots == 0 {
            return Err(ReputationError::NoCollectors);
        }
        let eta = policy.eta_for(slots, initial_threshold);
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ReputationError::InvalidRate(eta));
        }
        Ok(Self {
            reps: vec![0; slots],
            cnt: 0,
            epoch_threshold: initial_threshold.max(1),
            initial_threshold: initial_threshold.max(1),
            eta,
            epoch_index: 0,
            policy,
        })
    }

    /// Starts from explicit reputations, e.g. for oracle comparisons.
    pub fn with_reps(mut self, reps: Vec<i64>) -> Self {
        assert_eq!(reps.len(), self.reps.len());
        assert!(reps.iter().all(|&r| r <= 0), "reputations are nonpositive");
        self.reps = reps;
        self
    }

    pub fn reps(&self) -> &[i64] {
        &self.reps
    }

    pub fn slots(&self) -> usize {
        self.reps.len()
    }

    pub fn cnt(&self) -> u64 {
        self.cnt
    }

    pub fn epoch_threshold(&self) -> u64 {
        self.epoch_threshold
    }

    pub fn initial_threshold(&self) -> u64 {
        self.initial_threshold
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epoch_index(&self) -> u32 {
        self.epoch_index
    }

    pub fn probabilities(&self) -> Vec<f64> {
        selection_probabilities(&self.reps, self.eta).expect("state holds at least one slot")
    }

    /// Applies the one-sided penalty rule for a verified transaction and
    /// returns the per-slot change (0 or -1). `labels[k]` is `None` when slot
    /// `k` did not report, which counts as a −1 label.
    pub fn update_reputations(&mut self, labels: &[Option<Label>], verdict: Verdict) -> Vec<i64> {
        assert_eq!(labels.len(), self.reps.len(), "one label entry per slot");
        let deltas: Vec<i64> = labels
            .iter()
            .map(|label| {
                let plus = matches!(label, Some(Label::Plus));
                let penalised = match verdict {
                    Verdict::Valid => !plus,
                    Verdict::Invalid => plus,
                };
                -i64::from(penalised)
            })
            .collect();
        for (r, d) in self.reps.iter_mut().zip(&deltas) {
            *r += d;
        }
        self.cnt += 1;
        deltas
    }

    /// Closes the epoch when `cnt` has reached the threshold.
    pub fn maybe_advance_epoch(&mut self, mu: f64) -> Result<Option<RevenueReport>, ReputationError> {
        if self.cnt < self.epoch_threshold {
            return Ok(None);
        }
        let report = RevenueReport {
            epoch_index: self.epoch_index,
            shares: revenue_shares(&self.reps, mu)?,
        };
        self.reps.iter_mut().for_each(|r| *r = 0);
        self.cnt = 0;
        self.epoch_threshold *= 2;
        self.epoch_index += 1;
        self.eta = self.policy.eta_for(self.reps.len(), self.epoch_threshold);
        Ok(Some(report))
    }
}

impl Canonical for ReputationState {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.reps.len() as u64);
        for &r in &self.reps {
            enc.i64(r);
        }
        enc.u64(self.cnt)
            .u64(self.epoch_threshold)
            .u64(u64::from(self.epoch_index))
            .u64(self.eta.to_bits());
    }
}
