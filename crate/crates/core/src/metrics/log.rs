use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::reputation::RevenueReport;
use crate::types::{GovernorId, ProviderId, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreeningOutcome {
    Valid,
    Invalid,
    Unchecked,
}

/// One leader screening event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub round: u64,
    pub provider: ProviderId,
    pub tx: TxId,
    pub epoch_index: u32,
    pub epoch_threshold: u64,
    pub eta: f64,
    pub drawn_slot: usize,
    pub outcome: ScreeningOutcome,
    /// Realized per-transaction loss `-Σ_k p_k Δr_k`.
    pub proof_loss: f64,
    /// Per-slot reputation change; zeros when unverified.
    pub deltas: Vec<i64>,
}

impl ScreeningRecord {
    pub fn verified(&self) -> bool {
        self.outcome != ScreeningOutcome::Unchecked
    }

    /// Verified a ground-truth-invalid transaction.
    pub fn wasted(&self) -> bool {
        self.outcome == ScreeningOutcome::Invalid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    /// Generated or resubmitted, not yet screened.
    InFlight,
    /// Last screening discarded it unverified.
    Unchecked,
    /// Verified valid, waiting for block space.
    Carried,
    OnChain,
    VerifiedInvalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxTrack {
    pub generated_round: u64,
    pub valid: bool,
    pub status: TxStatus,
    pub included_round: Option<u64>,
    pub submissions: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: u64,
    pub leader_id: Option<GovernorId>,
    pub txs_screened: u64,
    pub txs_verified: u64,
    pub wasted_verifications: u64,
    pub blocks: u64,
    pub messages_pc: u64,
    pub messages_cg: u64,
    pub messages_gg: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub provider_collector: u64,
    pub collector_governor: u64,
    pub governor_governor: u64,
    pub broadcast_all: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub verification_calls: u64,
    pub wasted_verifications: u64,
    /// Transactions with a bad provider signature dropped by collectors.
    pub collector_dropped_forgeries: u64,
    /// Fabricated transactions emitted by Forger collectors.
    pub forgery_attempts: u64,
    /// Labeled copies rejected by governors for a bad provider signature.
    pub governor_rejected_forgeries: u64,
    pub governor_rejected_bad_collector_sig: u64,
    pub governor_rejected_unknown_slot: u64,
    pub conflicting_labels: u64,
    pub withheld: u64,
    pub election_exclusions: u64,
    pub transfers_applied: u64,
    pub transfers_rejected: u64,
    /// Round boundaries at which governor states differed.
    pub agreement_violations: u64,
    /// Messages delivered in a round other than the one after sending.
    pub synchrony_violations: u64,
    /// Blocks or verification messages a replica refused.
    pub replica_rejections: u64,
}

/// Everything recorded during one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    /// Number of collector slots per provider.
    pub slots: Vec<usize>,
    pub screenings: Vec<ScreeningRecord>,
    pub revenue: Vec<(ProviderId, RevenueReport)>,
    pub rounds: Vec<RoundRow>,
    pub txs: BTreeMap<TxId, TxTrack>,
    pub messages: MessageCounts,
    pub counters: Counters,
    pub events: Vec<String>,
}

impl MetricsLog {
    pub fn new(slots: Vec<usize>) -> Self {
        Self {
            slots,
            ..Self::default()
        }
    }

    pub fn screenings_for(&self, provider: ProviderId) -> impl Iterator<Item = &ScreeningRecord> {
        self.screenings.iter().filter(move |r| r.provider == provider)
    }

    /// Rounds from generation to inclusion for every on-chain valid transaction.
    pub fn inclusion_latencies(&self) -> Vec<u64> {
        self.txs
            .values()
            .filter_map(|t| t.included_round.map(|r| r - t.generated_round))
            .collect()
    }

    pub fn median_latency(&self) -> Option<f64> {
        let mut lat = self.inclusion_latencies();
        if lat.is_empty() {
            return None;
        }
        lat.sort_unstable();
        let n = lat.len();
        Some(if n % 2 == 1 {
            lat[n / 2] as f64
        } else {
            (lat[n / 2 - 1] + lat[n / 2]) as f64 / 2.0
        })
    }

    /// Fraction of ground-truth-valid transactions that reached the chain.
    pub fn valid_inclusion_rate(&self) -> f64 {
        let valid: Vec<&TxTrack> = self.txs.values().filter(|t| t.valid).collect();
        if valid.is_empty() {
            return 1.0;
        }
        valid.iter().filter(|t| t.status == TxStatus::OnChain).count() as f64 / valid.len() as f64
    }

    pub fn status_count(&self, status: TxStatus) -> usize {
        self.txs.values().filter(|t| t.status == status).count()
    }

    /// Per-slot penalty totals for one epoch of one provider.
    pub fn slot_penalties(&self, provider: ProviderId, epoch_index: u32) -> Vec<u64> {
        let mut totals = vec![0u64; self.slots[provider.index()]];
        for r in self
            .screenings_for(provider)
            .filter(|r| r.epoch_index == epoch_index)
        {
            for (t, d) in totals.iter_mut().zip(&r.deltas) {
                *t += d.unsigned_abs();
            }
        }
        totals
    }
}
