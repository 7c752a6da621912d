//! Domain objects shared across the simulator: transactions, labels, blocks
//! and per-round screening lists.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, Encoder};
use crate::crypto::{hash, Digest, KeyPair, Signature};
use crate::merkle::merkle_root;

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl Canonical for $name {
            fn encode(&self, enc: &mut Encoder) {
                enc.u64(u64::from(self.0));
            }
        }
    };
}

index_newtype!(
    /// Index into the provider set.
    ProviderId,
    "p"
);
index_newtype!(
    /// Index into the collector set.
    CollectorId,
    "c"
);
index_newtype!(
    /// Index into the governor set.
    GovernorId,
    "g"
);

/// Identity of a transaction. Resubmissions reuse it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxId {
    pub provider: ProviderId,
    pub seq: u64,
    pub timestamp: u64,
}

impl Canonical for TxId {
    fn encode(&self, enc: &mut Encoder) {
        enc.nested(&self.provider).u64(self.seq).u64(self.timestamp);
    }
}

/// A provider-signed transaction.
///
/// `ground_truth_valid` is the simulation oracle for the validity of the
/// payload. Only the collector and governor validation routines read it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub provider_id: ProviderId,
    pub seq: u64,
    pub timestamp: u64,
    ground_truth_valid: bool,
    pub signature: Signature,
}

impl Transaction {
    pub fn signing_payload(provider_id: ProviderId, seq: u64, timestamp: u64) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.nested(&provider_id).u64(seq).u64(timestamp);
        enc.finish()
    }

    pub fn new_signed(
        key: &KeyPair,
        provider_id: ProviderId,
        seq: u64,
        timestamp: u64,
        ground_truth_valid: bool,
    ) -> Self {
        let signature = key.sign(&Self::signing_payload(provider_id, seq, timestamp));
        Self {
            provider_id,
            seq,
            timestamp,
            ground_truth_valid,
            signature,
        }
    }

    /// Builds a transaction with an arbitrary signature, e.g. a forgery.
    pub fn with_signature(
        provider_id: ProviderId,
        seq: u64,
        timestamp: u64,
        ground_truth_valid: bool,
        signature: Signature,
    ) -> Self {
        Self {
            provider_id,
            seq,
            timestamp,
            ground_truth_valid,
            signature,
        }
    }

    pub fn id(&self) -> TxId {
        TxId {
            provider: self.provider_id,
            seq: self.seq,
            timestamp: self.timestamp,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        Self::signing_payload(self.provider_id, self.seq, self.timestamp)
    }

    /// Ground truth. Reserved for `validate_*` routines and test oracles.
    pub fn ground_truth_valid(&self) -> bool {
        self.ground_truth_valid
    }
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.nested(&self.provider_id)
            .u64(self.seq)
            .u64(self.timestamp)
            .bool(self.ground_truth_valid)
            .nested(&self.signature);
    }
}

/// A collector's ±1 opinion on a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Label {
    pub fn from_validity(valid: bool) -> Self {
        if valid {
            Label::Plus
        } else {
            Label::Minus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Plus => Label::Minus,
            Label::Minus => Label::Plus,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Label::Plus => 1,
            Label::Minus => -1,
        }
    }
}

impl Canonical for Label {
    fn encode(&self, enc: &mut Encoder) {
        enc.i64(self.as_i64());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTransaction {
    pub tx: Transaction,
    pub label: Label,
    pub collector_id: CollectorId,
    pub signature: Signature,
}

impl LabeledTransaction {
    pub fn signing_payload(tx: &Transaction, label: Label, collector_id: CollectorId) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.nested(tx).nested(&label).nested(&collector_id);
        enc.finish()
    }

    pub fn new_signed(key: &KeyPair, tx: Transaction, label: Label, collector_id: CollectorId) -> Self {
        let signature = key.sign(&Self::signing_payload(&tx, label, collector_id));
        Self {
            tx,
            label,
            collector_id,
            signature,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        Self::signing_payload(&self.tx, self.label, self.collector_id)
    }
}

/// Stake moved between governors, signed by the payer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeTransfer {
    pub from: GovernorId,
    pub to: GovernorId,
    pub amount: u64,
    pub round: u64,
    pub signature: Signature,
}

impl StakeTransfer {
    pub fn signing_payload(from: GovernorId, to: GovernorId, amount: u64, round: u64) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.nested(&from).nested(&to).u64(amount).u64(round);
        enc.finish()
    }

    pub fn new_signed(key: &KeyPair, from: GovernorId, to: GovernorId, amount: u64, round: u64) -> Self {
        let signature = key.sign(&Self::signing_payload(from, to, amount, round));
        Self {
            from,
            to,
            amount,
            round,
            signature,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        Self::signing_payload(self.from, self.to, self.amount, self.round)
    }
}

impl Canonical for StakeTransfer {
    fn encode(&self, enc: &mut Encoder) {
        enc.nested(&self.from)
            .nested(&self.to)
            .u64(self.amount)
            .u64(self.round)
            .nested(&self.signature);
    }
}

/// A ledger block. Ordinary blocks carry `tx_list`; stake-transfer blocks
/// carry `transfers` and an empty `tx_list`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub serial: u64,
    pub leader_id: GovernorId,
    pub tx_list: Vec<Transaction>,
    pub mt_root: Digest,
    pub prev_hash: Digest,
    pub transfers: Vec<StakeTransfer>,
    /// Leader signature over the block hash; not part of the hashed header.
    pub signature: Signature,
}

impl Block {
    pub fn genesis() -> Self {
        Self {
            serial: 0,
            leader_id: GovernorId(0),
            tx_list: Vec::new(),
            mt_root: Digest::ZERO,
            prev_hash: Digest::ZERO,
            transfers: Vec::new(),
            signature: Signature::default(),
        }
    }

    /// Canonical encoding of every hashed field, in declared order.
    pub fn header_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(self.serial)
            .nested(&self.leader_id)
            .list(&self.tx_list)
            .nested(&self.mt_root)
            .nested(&self.prev_hash)
            .list(&self.transfers);
        enc.finish()
    }

    pub fn is_transfer_block(&self) -> bool {
        !self.transfers.is_empty()
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(&self.header_bytes()).nested(&self.signature);
    }
}

/// Digest of a block's canonical header.
pub fn hash_block(block: &Block) -> Digest {
    hash(&block.header_bytes())
}

/// Outcome partition of one round's screened transactions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundLists {
    pub tx_list: Vec<Transaction>,
    pub invalid_list: Vec<Transaction>,
    pub unchecked_list: Vec<Transaction>,
}

const INVALID_TAG: u8 = 0x00;
const UNCHECKED_TAG: u8 = 0x01;

impl RoundLists {
    /// Merkle commitment to `(invalid_list, unchecked_list)`: invalid items
    /// first, each leaf prefixed with a one-byte list tag.
    pub fn commitment(&self) -> Digest {
        commit_lists(&self.invalid_list, &self.unchecked_list)
    }

    pub fn is_partition(&self) -> bool {
        let mut seen = HashSet::new();
        self.tx_list
            .iter()
            .chain(&self.invalid_list)
            .chain(&self.unchecked_list)
            .all(|tx| seen.insert(tx.id()))
    }

    pub fn len(&self) -> usize {
        self.tx_list.len() + self.invalid_list.len() + self.unchecked_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn commit_lists(invalid: &[Transaction], unchecked: &[Transaction]) -> Digest {
    let tagged = |tag: u8, tx: &Transaction| {
        let mut leaf = vec![tag];
        leaf.extend(tx.to_canonical_bytes());
        leaf
    };
    let leaves: Vec<Vec<u8>> = invalid
        .iter()
        .map(|tx| tagged(INVALID_TAG, tx))
        .chain(unchecked.iter().map(|tx| tagged(UNCHECKED_TAG, tx)))
        .collect();
    merkle_root(&leaves)
}
