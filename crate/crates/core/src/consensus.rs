//! Stake-weighted VRF leader election, block proposal and chain validation.
//!
//! Governors are trusted not to equivocate, so consensus reduces to every
//! governor deterministically replaying the leader's blocks. Validation still
//! checks every safety property and reports a distinct [`Violation`] for each.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, Encoder};
use crate::crypto::{hash, Digest, KeyPair, KeyRegistry, NodeId, VrfOutput};
use crate::nodes::governor::{GovernorNode, Received};
use crate::types::{
    hash_block, Block, GovernorId, Label, LabeledTransaction, RoundLists, StakeTransfer, Transaction, TxId,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("stake table is empty or has zero total stake")]
    NoStake,
    #[error("no governor produced a verifiable VRF output")]
    NoEligibleStake,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransferError {
    #[error("transfer signature does not verify under {0}")]
    BadSignature(GovernorId),
    #[error("{payer} holds {held} units, cannot pay {amount}")]
    Overdraft { payer: GovernorId, held: u64, amount: u64 },
    #[error("unknown governor {0}")]
    UnknownGovernor(GovernorId),
    #[error("transfer amount must be positive")]
    ZeroAmount,
}

/// Stake units held by each governor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeTable {
    stakes: BTreeMap<GovernorId, u64>,
}

impl StakeTable {
    pub fn new(stakes: impl IntoIterator<Item = (GovernorId, u64)>) -> Result<Self, ConsensusError> {
        let table = Self {
            stakes: stakes.into_iter().collect(),
        };
        if table.total() == 0 {
            return Err(ConsensusError::NoStake);
        }
        Ok(table)
    }

    pub fn from_units(units: &[u64]) -> Result<Self, ConsensusError> {
        Self::new(units.iter().enumerate().map(|(i, &s)| (GovernorId(i as u32), s)))
    }

    pub fn get(&self, id: GovernorId) -> Option<u64> {
        self.stakes.get(&id).copied()
    }

    pub fn total(&self) -> u64 {
        self.stakes.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GovernorId, u64)> + '_ {
        self.stakes.iter().map(|(&g, &s)| (g, s))
    }
}

impl Canonical for StakeTable {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.stakes.len() as u64);
        for (g, s) in &self.stakes {
            enc.nested(g).u64(*s);
        }
    }
}

/// VRF input for stake unit `unit` in the round seeded by `round_seed`.
pub fn vrf_input(round_seed: &Digest, unit: u64) -> Vec<u8> {
    let mut input = round_seed.0.to_vec();
    input.extend_from_slice(&unit.to_be_bytes());
    input
}

/// A governor's VRF outputs for each of its stake units.
pub fn announce(key: &KeyPair, units: u64, round_seed: &Digest) -> Vec<VrfOutput> {
    (0..units).map(|j| key.vrf_eval(&vrf_input(round_seed, j))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionResult {
    pub leader: GovernorId,
    pub winning_value: Digest,
    /// Governors whose announcements failed verification this round.
    pub excluded: Vec<GovernorId>,
}

/// The owner of the stake unit with the least VRF value leads. Ties break on
/// `(value, governor id)`. Governors whose outputs do not verify, or who
/// announced the wrong number of units, are excluded for the round.
pub fn elect_leader(
    stakes: &StakeTable,
    round_seed: &Digest,
    announcements: &BTreeMap<GovernorId, Vec<VrfOutput>>,
    registry: &KeyRegistry,
) -> Result<ElectionResult, ConsensusError> {
    if stakes.total() == 0 {
        return Err(ConsensusError::NoStake);
    }
    let mut best: Option<(Digest, GovernorId)> = None;
    let mut excluded = Vec::new();
    for (gov, units) in stakes.iter() {
        if units == 0 {
            continue;
        }
        let Some(outputs) = announcements.get(&gov) else {
            excluded.push(gov);
            continue;
        };
        let public = registry.public_of(NodeId::Governor(gov.0));
        let verified = outputs.len() as u64 == units
            && public.is_some_and(|pk| {
                outputs
                    .iter()
                    .enumerate()
                    .all(|(j, out)| registry.vrf_verify(&pk, &vrf_input(round_seed, j as u64), out))
            });
        if !verified {
            excluded.push(gov);
            continue;
        }
        for out in outputs {
            let candidate = (out.value, gov);
            if best.is_none_or(|b| candidate < b) {
                best = Some(candidate);
            }
        }
    }
    let (winning_value, leader) = best.ok_or(ConsensusError::NoEligibleStake)?;
    Ok(ElectionResult {
        leader,
        winning_value,
        excluded,
    })
}

/// Moves stake from the payer to the payee after checking the payer's
/// signature and balance. Total stake is conserved.
pub fn apply_stake_transfer(
    stakes: &StakeTable,
    transfer: &StakeTransfer,
    registry: &KeyRegistry,
) -> Result<StakeTable, TransferError> {
    if transfer.amount == 0 {
        return Err(TransferError::ZeroAmount);
    }
    let held = stakes
        .get(transfer.from)
        .ok_or(TransferError::UnknownGovernor(transfer.from))?;
    let received = stakes
        .get(transfer.to)
        .ok_or(TransferError::UnknownGovernor(transfer.to))?;
    if !registry.verify_node(NodeId::Governor(transfer.from.0), &transfer.payload(), &transfer.signature) {
        return Err(TransferError::BadSignature(transfer.from));
    }
    if transfer.amount > held {
        return Err(TransferError::Overdraft {
            payer: transfer.from,
            held,
            amount: transfer.amount,
        });
    }
    let mut next = stakes.clone();
    if transfer.from != transfer.to {
        next.stakes.insert(transfer.from, held - transfer.amount);
        next.stakes.insert(transfer.to, received + transfer.amount);
    }
    Ok(next)
}

/// Safety violations detected while appending a block.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("no skipping: expected serial {expected}, found {found}")]
    NoSkipping { expected: u64, found: u64 },
    #[error("chain integrity: prev_hash does not match the tip")]
    ChainIntegrity,
    #[error("block from {found}, expected leader {expected}")]
    WrongLeader { expected: GovernorId, found: GovernorId },
    #[error("leader signature does not verify")]
    BadLeaderSignature,
    #[error("block holds {len} transactions, limit {limit}")]
    BlockTooLarge { len: usize, limit: usize },
    #[error("transaction {0:?} carries an invalid provider signature")]
    ForgedTransaction(TxId),
    #[error("transaction {0:?} has no verified +1 label in the evidence")]
    MissingPlusLabel(TxId),
    #[error("transaction {0:?} is already on chain or repeated")]
    DuplicateTransaction(TxId),
    #[error("Merkle commitment does not match the broadcast lists")]
    CommitmentMismatch,
    #[error("stake-transfer block also carries transactions")]
    MixedBlock,
    #[error("invalid stake transfer: {0}")]
    InvalidTransfer(TransferError),
}

impl Violation {
    /// Stable short code for logs and CSV output.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::NoSkipping { .. } => "no_skipping",
            Violation::ChainIntegrity => "chain_integrity",
            Violation::WrongLeader { .. } => "wrong_leader",
            Violation::BadLeaderSignature => "bad_leader_signature",
            Violation::BlockTooLarge { .. } => "block_too_large",
            Violation::ForgedTransaction(_) => "forged_transaction",
            Violation::MissingPlusLabel(_) => "missing_plus_label",
            Violation::DuplicateTransaction(_) => "duplicate_transaction",
            Violation::CommitmentMismatch => "commitment_mismatch",
            Violation::MixedBlock => "mixed_block",
            Violation::InvalidTransfer(_) => "invalid_transfer",
        }
    }
}

/// Everything a governor needs to validate a received block.
pub struct ValidationContext<'a> {
    pub expected_leader: GovernorId,
    pub registry: &'a KeyRegistry,
    pub b_limit: usize,
    /// Collector labels for each transaction the leader verified as valid.
    pub evidence: &'a HashMap<TxId, Received>,
    /// The `(InvalidList, UncheckedList)` broadcast that accompanies the block.
    pub lists: Option<&'a RoundLists>,
}

/// Hash-chained, serial-numbered blocks plus the stake table they imply.
#[derive(Debug, Clone)]
pub struct Ledger {
    blocks: Vec<Block>,
    tip_hash: Digest,
    on_chain: HashSet<TxId>,
    stakes: StakeTable,
    archive: BTreeMap<u64, RoundLists>,
}

impl Ledger {
    pub fn new(stakes: StakeTable) -> Self {
        let genesis = Block::genesis();
        Self {
            tip_hash: hash_block(&genesis),
            blocks: vec![genesis],
            on_chain: HashSet::new(),
            stakes,
            archive: BTreeMap::new(),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn last(&self) -> &Block {
        self.blocks.last().expect("ledger always holds genesis")
    }

    pub fn tip_hash(&self) -> Digest {
        self.tip_hash
    }

    pub fn height(&self) -> u64 {
        self.last().serial
    }

    pub fn stakes(&self) -> &StakeTable {
        &self.stakes
    }

    pub fn contains_tx(&self, id: &TxId) -> bool {
        self.on_chain.contains(id)
    }

    pub fn tx_count(&self) -> usize {
        self.on_chain.len()
    }

    /// Broadcast lists kept alongside each ordinary block.
    pub fn archive(&self) -> &BTreeMap<u64, RoundLists> {
        &self.archive
    }

    /// Drops archived lists for serials below `serial`.
    pub fn prune_archive(&mut self, serial: u64) {
        self.archive = self.archive.split_off(&serial);
    }

    /// Digest of the chain tip and stake table, for agreement checks.
    pub fn digest(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.nested(&self.tip_hash).u64(self.height()).nested(&self.stakes);
        hash(&enc.finish())
    }

    /// One hex-encoded canonical block serialization per line.
    pub fn export_lines(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            out.push_str(&hex::encode(block.to_canonical_bytes()));
            out.push('\n');
        }
        out
    }
}

fn has_verified_plus(received: &Received, tx: &Transaction, registry: &KeyRegistry) -> bool {
    received.iter().any(|(collector, entry)| {
        entry.label == Label::Plus
            && registry.verify_node(
                NodeId::Collector(collector.0),
                &LabeledTransaction::signing_payload(tx, entry.label, *collector),
                &entry.signature,
            )
    })
}

/// Checks the block against every safety rule and appends it on success.
pub fn validate_and_append(ledger: &mut Ledger, block: Block, ctx: &ValidationContext<'_>) -> Result<(), Violation> {
    let expected = ledger.height() + 1;
    if block.serial != expected {
        return Err(Violation::NoSkipping {
            expected,
            found: block.serial,
        });
    }
    if block.prev_hash != ledger.tip_hash {
        return Err(Violation::ChainIntegrity);
    }
    if block.leader_id != ctx.expected_leader {
        return Err(Violation::WrongLeader {
            expected: ctx.expected_leader,
            found: block.leader_id,
        });
    }
    let block_hash = hash_block(&block);
    if !ctx
        .registry
        .verify_node(NodeId::Governor(block.leader_id.0), &block_hash.0, &block.signature)
    {
        return Err(Violation::BadLeaderSignature);
    }
    if block.tx_list.len() > ctx.b_limit {
        return Err(Violation::BlockTooLarge {
            len: block.tx_list.len(),
            limit: ctx.b_limit,
        });
    }
    if block.is_transfer_block() && !block.tx_list.is_empty() {
        return Err(Violation::MixedBlock);
    }
    let mut seen = HashSet::new();
    for tx in &block.tx_list {
        let id = tx.id();
        if !ctx
            .registry
            .verify_node(NodeId::Provider(tx.provider_id.0), &tx.payload(), &tx.signature)
        {
            return Err(Violation::ForgedTransaction(id));
        }
        if ledger.on_chain.contains(&id) || !seen.insert(id) {
            return Err(Violation::DuplicateTransaction(id));
        }
        let backed = ctx
            .evidence
            .get(&id)
            .is_some_and(|received| has_verified_plus(received, tx, ctx.registry));
        if !backed {
            return Err(Violation::MissingPlusLabel(id));
        }
    }
    if let Some(lists) = ctx.lists {
        if lists.commitment() != block.mt_root {
            return Err(Violation::CommitmentMismatch);
        }
    }
    let mut stakes = ledger.stakes.clone();
    for transfer in &block.transfers {
        stakes = apply_stake_transfer(&stakes, transfer, ctx.registry).map_err(Violation::InvalidTransfer)?;
    }

    ledger.on_chain.extend(seen);
    ledger.stakes = stakes;
    if let Some(lists) = ctx.lists {
        ledger.archive.insert(block.serial, lists.clone());
    }
    ledger.tip_hash = block_hash;
    ledger.blocks.push(block);
    Ok(())
}

/// Builds the leader's block for this round: up to `b_limit` verified-valid
/// transactions in verification order (the rest carry over), a commitment to
/// the round's invalid and unchecked lists, and the hash of the previous block.
pub fn propose_block(leader: &mut GovernorNode) -> (Block, RoundLists) {
    let lists = leader.take_round_lists();
    let tx_list = leader.next_block_transactions();
    let ledger = leader.ledger();
    let mut block = Block {
        serial: ledger.height() + 1,
        leader_id: leader.id,
        tx_list,
        mt_root: lists.commitment(),
        prev_hash: ledger.tip_hash(),
        transfers: Vec::new(),
        signature: Default::default(),
    };
    block.signature = leader.keypair().sign(&hash_block(&block).0);
    (block, lists)
}

/// Builds a stake-transfer block carrying `transfers`.
pub fn propose_transfer_block(leader: &GovernorNode, transfers: Vec<StakeTransfer>) -> Block {
    let ledger = leader.ledger();
    let mut block = Block {
        serial: ledger.height() + 1,
        leader_id: leader.id,
        tx_list: Vec::new(),
        mt_root: Digest::ZERO,
        prev_hash: ledger.tip_hash(),
        transfers,
        signature: Default::default(),
    };
    block.signature = leader.keypair().sign(&hash_block(&block).0);
    block
}
