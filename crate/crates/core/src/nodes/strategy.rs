use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::Label;

/// Labeling policy of a collector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StrategyKind {
    Honest,
    AlwaysPlus,
    AlwaysMinus,
    /// Flips the honest label independently with probability `q`.
    FlipProb(f64),
    /// Drops the transaction with probability `q`, otherwise honest.
    Withhold(f64),
    /// Honest on real transactions, but also fabricates transactions with
    /// invalid provider signatures.
    Forger,
}

impl StrategyKind {
    pub fn is_honest(&self) -> bool {
        matches!(self, StrategyKind::Honest)
    }

    pub fn probability(&self) -> Option<f64> {
        match *self {
            StrategyKind::FlipProb(q) | StrategyKind::Withhold(q) => Some(q),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectorStrategy {
    pub kind: StrategyKind,
    rng: ChaCha8Rng,
}

impl CollectorStrategy {
    pub fn new(kind: StrategyKind, rng: ChaCha8Rng) -> Self {
        Self { kind, rng }
    }

    /// Label to upload for a transaction whose collector-side validation
    /// returned `valid`, or `None` to withhold it.
    pub fn label(&mut self, valid: bool) -> Option<Label> {
        let honest = Label::from_validity(valid);
        match self.kind {
            StrategyKind::Honest | StrategyKind::Forger => Some(honest),
            StrategyKind::AlwaysPlus => Some(Label::Plus),
            StrategyKind::AlwaysMinus => Some(Label::Minus),
            StrategyKind::FlipProb(q) => {
                if self.rng.gen_bool(q) {
                    Some(honest.flipped())
                } else {
                    Some(honest)
                }
            }
            StrategyKind::Withhold(q) => {
                if self.rng.gen_bool(q) {
                    None
                } else {
                    Some(honest)
                }
            }
        }
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
