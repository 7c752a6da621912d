//! Governor state machine: label collection with the Δ window, leader-side
//! screening, replicated reputation updates and block commitment.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::codec::Encoder;
use crate::consensus::{validate_and_append, ElectionResult, Ledger, StakeTable, ValidationContext, Violation};
use crate::crypto::{hash, Digest, KeyPair, KeyRegistry, NodeId, Signature};
use crate::reputation::{
    draw_collector, EtaPolicy, ReputationError, ReputationState, RevenueReport, Verdict,
};
use crate::types::{
    Block, CollectorId, GovernorId, Label, LabeledTransaction, ProviderId, RoundLists, Transaction, TxId,
};

/// A collector's signed label as recorded in `received[tx]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelEntry {
    pub label: Label,
    pub signature: Signature,
}

/// `received[tx]`: at most one label per collector.
pub type Received = BTreeMap<CollectorId, LabelEntry>;

fn encode_received(enc: &mut Encoder, received: &Received) {
    enc.u64(received.len() as u64);
    for (c, e) in received {
        enc.nested(c).nested(&e.label).nested(&e.signature);
    }
}

#[derive(Debug, Error)]
pub enum GovernorError {
    #[error(transparent)]
    Reputation(#[from] ReputationError),
    #[error("verification message for unknown provider {0}")]
    UnknownProvider(ProviderId),
    #[error("verification message not signed by leader {0}")]
    BadMessageSignature(GovernorId),
    #[error("reorder buffer for {provider} exceeded {limit} messages; next expected cnt {expected_cnt}")]
    ReorderOverflow {
        provider: ProviderId,
        expected_cnt: u64,
        limit: usize,
    },
    #[error("block rejected: {0}")]
    Block(#[from] Violation),
    #[error("no leader elected for the block being validated")]
    NoElectedLeader,
}

/// Leader broadcast after verifying a transaction: `(tx, validbit,
/// received[tx], cnt_i)`, plus the epoch index so that replicas can order
/// messages across the counter reset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationMessage {
    pub leader: GovernorId,
    pub tx: Transaction,
    pub valid: bool,
    pub received: Received,
    pub epoch_index: u32,
    pub cnt: u64,
    pub signature: Signature,
}

impl VerificationMessage {
    fn body(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.nested(&self.leader).nested(&self.tx).bool(self.valid);
        encode_received(&mut enc, &self.received);
        enc.u64(u64::from(self.epoch_index)).u64(self.cnt);
        enc.finish()
    }

    fn order_key(&self) -> (u32, u64) {
        (self.epoch_index, self.cnt)
    }
}

/// Transaction waiting out its Δ window.
#[derive(Debug, Clone)]
pub struct PendingTx {
    pub tx: Transaction,
    pub received: Received,
    pub expires_at: u64,
}

/// Outcome of inserting a labeled copy into `received`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// First copy of the transaction; the Δ timer started.
    FirstSighting,
    Added,
    /// Same collector, same label.
    Duplicate,
    /// Same collector, opposite label; the first label stands.
    Conflicting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    BadCollectorSignature,
    ForgedTransaction,
    /// Collector is not connected to the transaction's provider.
    UnknownSlot,
    /// Transaction is on chain, proven invalid or awaiting inclusion.
    Settled,
}

/// Result of drawing one slot and, if it labeled +1, verifying.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenDecision {
    pub drawn_slot: usize,
    pub probabilities: Vec<f64>,
    /// `None` when the drawn slot did not label +1 and nothing was verified.
    pub verdict: Option<Verdict>,
    /// Per-slot reputation change (all zero when unverified).
    pub deltas: Vec<i64>,
    /// Expected loss under the selection distribution: `-Σ p_k Δr_k`.
    pub proof_loss: f64,
    pub epoch_index: u32,
    pub epoch_threshold: u64,
    pub eta: f64,
    /// `cnt_i` after the increment, zero when unverified.
    pub cnt: u64,
    pub revenue: Option<RevenueReport>,
}

/// Cost-free ground-truth verification by a governor.
pub fn validate_governor(tx: &Transaction) -> bool {
    tx.ground_truth_valid()
}

/// Draws a slot from the softmax over all slots and verifies when that slot
/// labeled +1, then applies the penalty rule and the epoch check.
/// `labels[k]` is `None` for a slot that did not report.
pub fn screen_labels<R: Rng + ?Sized>(
    state: &mut ReputationState,
    labels: &[Option<Label>],
    validate: impl FnOnce() -> bool,
    mu: f64,
    rng: &mut R,
) -> Result<ScreenDecision, ReputationError> {
    let probabilities = state.probabilities();
    let drawn_slot = draw_collector(&probabilities, rng);
    let epoch_index = state.epoch_index();
    let epoch_threshold = state.epoch_threshold();
    let eta = state.eta();
    if labels[drawn_slot] != Some(Label::Plus) {
        return Ok(ScreenDecision {
            drawn_slot,
            deltas: vec![0; labels.len()],
            probabilities,
            verdict: None,
            proof_loss: 0.0,
            epoch_index,
            epoch_threshold,
            eta,
            cnt: 0,
            revenue: None,
        });
    }
    let verdict = Verdict::from_validity(validate());
    let deltas = state.update_reputations(labels, verdict);
    let cnt = state.cnt();
    let proof_loss = -probabilities
        .iter()
        .zip(&deltas)
        .map(|(p, &d)| p * d as f64)
        .sum::<f64>();
    let revenue = state.maybe_advance_epoch(mu)?;
    Ok(ScreenDecision {
        drawn_slot,
        probabilities,
        verdict: Some(verdict),
        deltas,
        proof_loss,
        epoch_index,
        epoch_threshold,
        eta,
        cnt,
        revenue,
    })
}

#[derive(Debug, Clone)]
struct ProviderBook {
    slots: Vec<CollectorId>,
    slot_of: HashMap<CollectorId, usize>,
    state: ReputationState,
}

impl ProviderBook {
    fn labels(&self, received: &Received) -> Vec<Option<Label>> {
        self.slots
            .iter()
            .map(|c| received.get(c).map(|e| e.label))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GovernorParams {
    pub delta_rounds: u64,
    pub mu: f64,
    pub b_limit: usize,
    pub epoch_threshold: u64,
    pub eta_policy: EtaPolicy,
}

/// Largest number of out-of-order verification messages held per provider.
pub const REORDER_HORIZON: usize = 4096;

#[derive(Debug, Clone)]
pub struct GovernorNode {
    pub id: GovernorId,
    keypair: KeyPair,
    params: GovernorParams,
    books: Vec<ProviderBook>,
    received: BTreeMap<TxId, PendingTx>,
    ledger: Ledger,
    carry_over: VecDeque<TxId>,
    carry_evidence: HashMap<TxId, Received>,
    carry_txs: HashMap<TxId, Transaction>,
    known_invalid: HashSet<TxId>,
    reorder: BTreeMap<ProviderId, BTreeMap<(u32, u64), VerificationMessage>>,
    round_lists: RoundLists,
    elected: Option<GovernorId>,
}

impl GovernorNode {
    /// `topology[i]` lists the collectors connected to provider `i`, in slot
    /// order.
    pub fn new(
        id: GovernorId,
        keypair: KeyPair,
        topology: &[Vec<CollectorId>],
        stakes: StakeTable,
        params: GovernorParams,
    ) -> Result<Self, GovernorError> {
        let books = topology
            .iter()
            .map(|slots| {
                Ok(ProviderBook {
                    slot_of: slots.iter().enumerate().map(|(k, &c)| (c, k)).collect(),
                    state: ReputationState::new(slots.len(), params.epoch_threshold, params.eta_policy)?,
                    slots: slots.clone(),
                })
            })
            .collect::<Result<Vec<_>, ReputationError>>()?;
        Ok(Self {
            id,
            keypair,
            params,
            books,
            received: BTreeMap::new(),
            ledger: Ledger::new(stakes),
            carry_over: VecDeque::new(),
            carry_evidence: HashMap::new(),
            carry_txs: HashMap::new(),
            known_invalid: HashSet::new(),
            reorder: BTreeMap::new(),
            round_lists: RoundLists::default(),
            elected: None,
        })
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn params(&self) -> &GovernorParams {
        &self.params
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn reputation(&self, provider: ProviderId) -> Option<&ReputationState> {
        self.books.get(provider.index()).map(|b| &b.state)
    }

    pub fn slots(&self, provider: ProviderId) -> Option<&[CollectorId]> {
        self.books.get(provider.index()).map(|b| b.slots.as_slice())
    }

    pub fn received(&self, id: &TxId) -> Option<&PendingTx> {
        self.received.get(id)
    }

    pub fn pending_count(&self) -> usize {
        self.received.len()
    }

    pub fn carry_over(&self) -> impl Iterator<Item = &TxId> {
        self.carry_over.iter()
    }

    pub fn is_known_invalid(&self, id: &TxId) -> bool {
        self.known_invalid.contains(id)
    }

    pub fn elected(&self) -> Option<GovernorId> {
        self.elected
    }

    pub fn record_election(&mut self, result: &ElectionResult) {
        self.elected = Some(result.leader);
    }

    fn is_settled(&self, id: &TxId) -> bool {
        self.ledger.contains_tx(id) || self.known_invalid.contains(id) || self.carry_evidence.contains_key(id)
    }

    /// Handles a labeled copy delivered from a collector in `round`.
    pub fn on_labeled_tx(
        &mut self,
        ltx: &LabeledTransaction,
        round: u64,
        registry: &KeyRegistry,
    ) -> Result<InsertOutcome, RejectReason> {
        if !registry.verify_node(NodeId::Collector(ltx.collector_id.0), &ltx.payload(), &ltx.signature) {
            return Err(RejectReason::BadCollectorSignature);
        }
        let tx = &ltx.tx;
        if !registry.verify_node(NodeId::Provider(tx.provider_id.0), &tx.payload(), &tx.signature) {
            return Err(RejectReason::ForgedTransaction);
        }
        let connected = self
            .books
            .get(tx.provider_id.index())
            .is_some_and(|b| b.slot_of.contains_key(&ltx.collector_id));
        if !connected {
            return Err(RejectReason::UnknownSlot);
        }
        let id = tx.id();
        if self.is_settled(&id) {
            return Err(RejectReason::Settled);
        }
        let expires_at = round + self.params.delta_rounds;
        let mut first = false;
        let pending = self.received.entry(id).or_insert_with(|| {
            first = true;
            PendingTx {
                tx: tx.clone(),
                received: Received::new(),
                expires_at,
            }
        });
        let outcome = match pending.received.get(&ltx.collector_id) {
            Some(existing) if existing.label == ltx.label => InsertOutcome::Duplicate,
            Some(_) => InsertOutcome::Conflicting,
            None => {
                pending.received.insert(
                    ltx.collector_id,
                    LabelEntry {
                        label: ltx.label,
                        signature: ltx.signature,
                    },
                );
                if first {
                    InsertOutcome::FirstSighting
                } else {
                    InsertOutcome::Added
                }
            }
        };
        Ok(outcome)
    }

    /// Removes and returns every transaction whose Δ window ends at or before
    /// `round`, in transaction-id order. Every governor calls this; only the
    /// leader screens the result.
    pub fn expire(&mut self, round: u64) -> Vec<PendingTx> {
        let due: Vec<TxId> = self
            .received
            .iter()
            .filter(|(_, p)| p.expires_at <= round)
            .map(|(id, _)| *id)
            .collect();
        due.iter()
            .filter_map(|id| self.received.remove(id))
            .collect()
    }

    /// Leader-side screening of one expired transaction. Returns `None` when
    /// the transaction is already settled.
    pub fn screen<R: Rng + ?Sized>(
        &mut self,
        pending: PendingTx,
        rng: &mut R,
    ) -> Result<Option<(ScreenDecision, Option<VerificationMessage>)>, GovernorError> {
        let id = pending.tx.id();
        if self.is_settled(&id) {
            return Ok(None);
        }
        let provider = pending.tx.provider_id;
        let book = self
            .books
            .get_mut(provider.index())
            .ok_or(GovernorError::UnknownProvider(provider))?;
        let labels = book.labels(&pending.received);
        let tx = pending.tx;
        let decision = screen_labels(&mut book.state, &labels, || validate_governor(&tx), self.params.mu, rng)?;
        let message = match decision.verdict {
            None => {
                self.round_lists.unchecked_list.push(tx);
                None
            }
            Some(verdict) => {
                let valid = verdict == Verdict::Valid;
                let mut msg = VerificationMessage {
                    leader: self.id,
                    tx: tx.clone(),
                    valid,
                    received: pending.received.clone(),
                    epoch_index: decision.epoch_index,
                    cnt: decision.cnt,
                    signature: Signature::default(),
                };
                msg.signature = self.keypair.sign(&msg.body());
                if valid {
                    self.round_lists.tx_list.push(tx.clone());
                    self.push_carry(tx, pending.received);
                } else {
                    self.known_invalid.insert(id);
                    self.round_lists.invalid_list.push(tx);
                }
                Some(msg)
            }
        };
        Ok(Some((decision, message)))
    }

    fn push_carry(&mut self, tx: Transaction, received: Received) {
        let id = tx.id();
        self.carry_over.push_back(id);
        self.carry_evidence.insert(id, received);
        self.carry_txs.insert(id, tx);
    }

    /// Replica-side application of a leader's verification message. Messages
    /// are applied in `(epoch, cnt)` order; early arrivals wait in a buffer.
    /// Returns how many messages were applied.
    pub fn on_verification_message(
        &mut self,
        msg: VerificationMessage,
        registry: &KeyRegistry,
    ) -> Result<usize, GovernorError> {
        if !registry.verify_node(NodeId::Governor(msg.leader.0), &msg.body(), &msg.signature) {
            return Err(GovernorError::BadMessageSignature(msg.leader));
        }
        let provider = msg.tx.provider_id;
        if provider.index() >= self.books.len() {
            return Err(GovernorError::UnknownProvider(provider));
        }
        let buffer = self.reorder.entry(provider).or_default();
        buffer.insert(msg.order_key(), msg);
        let mut applied = 0;
        loop {
            let state = &self.books[provider.index()].state;
            let expected = (state.epoch_index(), state.cnt() + 1);
            let Some(next) = self.reorder.get_mut(&provider).and_then(|b| b.remove(&expected)) else {
                break;
            };
            self.apply_verification(next)?;
            applied += 1;
        }
        let buffered = self.reorder.get(&provider).map_or(0, BTreeMap::len);
        if buffered > REORDER_HORIZON {
            let state = &self.books[provider.index()].state;
            return Err(GovernorError::ReorderOverflow {
                provider,
                expected_cnt: state.cnt() + 1,
                limit: REORDER_HORIZON,
            });
        }
        Ok(applied)
    }

    fn apply_verification(&mut self, msg: VerificationMessage) -> Result<(), GovernorError> {
        let book = &mut self.books[msg.tx.provider_id.index()];
        let labels = book.labels(&msg.received);
        book.state
            .update_reputations(&labels, Verdict::from_validity(msg.valid));
        book.state.maybe_advance_epoch(self.params.mu)?;
        let id = msg.tx.id();
        if msg.valid {
            self.push_carry(msg.tx, msg.received);
        } else {
            self.known_invalid.insert(id);
        }
        Ok(())
    }

    pub(crate) fn take_round_lists(&mut self) -> RoundLists {
        std::mem::take(&mut self.round_lists)
    }

    /// Up to `b_limit` carried transactions, oldest first.
    pub(crate) fn next_block_transactions(&self) -> Vec<Transaction> {
        self.carry_over
            .iter()
            .take(self.params.b_limit)
            .map(|id| self.carry_txs[id].clone())
            .collect()
    }

    /// Validates a block from the round's elected leader and appends it.
    /// `lists` accompanies ordinary blocks.
    pub fn on_block(
        &mut self,
        block: Block,
        lists: Option<&RoundLists>,
        registry: &KeyRegistry,
    ) -> Result<(), GovernorError> {
        let expected_leader = self.elected.ok_or(GovernorError::NoElectedLeader)?;
        let included: Vec<TxId> = block.tx_list.iter().map(Transaction::id).collect();
        let ctx = ValidationContext {
            expected_leader,
            registry,
            b_limit: self.params.b_limit,
            evidence: &self.carry_evidence,
            lists,
        };
        validate_and_append(&mut self.ledger, block, &ctx)?;
        if !included.is_empty() {
            let done: HashSet<TxId> = included.into_iter().collect();
            self.carry_over.retain(|id| !done.contains(id));
            for id in &done {
                self.carry_evidence.remove(id);
                self.carry_txs.remove(id);
            }
        }
        if let Some(lists) = lists {
            self.known_invalid
                .extend(lists.invalid_list.iter().map(Transaction::id));
        }
        Ok(())
    }

    /// Digest over everything that must agree across governors at a round
    /// boundary: chain tip, stakes, reputation states and the carry-over queue.
    pub fn state_digest(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.nested(&self.ledger.digest());
        for book in &self.books {
            enc.nested(&book.state);
        }
        enc.u64(self.carry_over.len() as u64);
        for id in &self.carry_over {
            enc.nested(id);
        }
        enc.u64(self.known_invalid.len() as u64);
        hash(&enc.finish())
    }
}
