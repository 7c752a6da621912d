//! Synchronous message bus. Everything sent during round `r` is handed out
//! in one batch at the start of round `r + 1`.

use std::collections::BTreeMap;

use crate::nodes::VerificationMessage;
use crate::types::{Block, CollectorId, LabeledTransaction, RoundLists, Transaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    ProviderCollector,
    CollectorGovernor,
    GovernorGovernor,
    BroadcastAll,
}

/// A block and, for ordinary blocks, the round's lists.
#[derive(Debug, Clone)]
pub struct BlockBroadcast {
    pub block: Block,
    pub lists: Option<RoundLists>,
}

/// One round's worth of traffic. Labeled transactions, verification messages
/// and blocks go to every governor; blocks also reach every provider and
/// collector.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub to_collectors: BTreeMap<CollectorId, Vec<Transaction>>,
    pub labeled: Vec<LabeledTransaction>,
    pub verification: Vec<VerificationMessage>,
    pub blocks: Vec<BlockBroadcast>,
}

impl Batch {
    fn is_empty(&self) -> bool {
        self.to_collectors.is_empty() && self.labeled.is_empty() && self.verification.is_empty() && self.blocks.is_empty()
    }
}

/// One delivery, for synchrony audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitRecord {
    pub channel: Channel,
    pub sent_round: u64,
    pub delivered_round: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Default)]
pub struct MessageBus {
    outgoing: Batch,
    sent_round: Option<u64>,
    counts: BTreeMap<Channel, u64>,
    log: Vec<TransitRecord>,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    fn stamp(&mut self, round: u64, channel: Channel, count: u64) {
        match self.sent_round {
            Some(r) => assert_eq!(r, round, "batch already holds round {r} traffic"),
            None => self.sent_round = Some(round),
        }
        *self.counts.entry(channel).or_insert(0) += count;
    }

    pub fn send_tx(&mut self, round: u64, to: CollectorId, tx: Transaction) {
        self.stamp(round, Channel::ProviderCollector, 1);
        self.outgoing.to_collectors.entry(to).or_default().push(tx);
    }

    /// A collector broadcasting to `governors` governors.
    pub fn send_labeled(&mut self, round: u64, ltx: LabeledTransaction, governors: u64) {
        self.stamp(round, Channel::CollectorGovernor, governors);
        self.outgoing.labeled.push(ltx);
    }

    pub fn send_verification(&mut self, round: u64, msg: VerificationMessage, recipients: u64) {
        self.stamp(round, Channel::GovernorGovernor, recipients);
        self.outgoing.verification.push(msg);
    }

    pub fn send_block(&mut self, round: u64, broadcast: BlockBroadcast, recipients: u64) {
        self.stamp(round, Channel::BroadcastAll, recipients);
        self.outgoing.blocks.push(broadcast);
    }

    /// Counts traffic that is delivered within the round, such as VRF
    /// announcements exchanged during election.
    pub fn count_instant(&mut self, channel: Channel, count: u64) {
        *self.counts.entry(channel).or_insert(0) += count;
    }

    pub fn is_idle(&self) -> bool {
        self.outgoing.is_empty()
    }

    /// Hands out what was sent in the previous round.
    pub fn deliver(&mut self, round: u64) -> Batch {
        let batch = std::mem::take(&mut self.outgoing);
        if let Some(sent) = self.sent_round.take() {
            let per_channel = [
                (Channel::ProviderCollector, batch.to_collectors.values().map(Vec::len).sum::<usize>()),
                (Channel::CollectorGovernor, batch.labeled.len()),
                (Channel::GovernorGovernor, batch.verification.len()),
                (Channel::BroadcastAll, batch.blocks.len()),
            ];
            for (channel, count) in per_channel {
                if count > 0 {
                    self.log.push(TransitRecord {
                        channel,
                        sent_round: sent,
                        delivered_round: round,
                        count: count as u64,
                    });
                }
            }
        }
        batch
    }

    /// Total recipient-messages per channel since the start.
    pub fn counts(&self) -> &BTreeMap<Channel, u64> {
        &self.counts
    }

    pub fn log(&self) -> &[TransitRecord] {
        &self.log
    }

    /// Deliveries that crossed more or fewer than one round boundary.
    pub fn synchrony_violations(&self) -> usize {
        self.log
            .iter()
            .filter(|t| t.delivered_round != t.sent_round + 1)
            .count()
    }
}
