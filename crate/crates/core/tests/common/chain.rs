use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use repchain::consensus::{announce, elect_leader, propose_block, StakeTable};
use repchain::crypto::{Digest, KeyPair, KeyRegistry, NodeId, Signature};
use repchain::nodes::governor::VerificationMessage;
use repchain::nodes::{CollectorNode, CollectorOutput, CollectorStrategy, GovernorNode, GovernorParams, ProviderNode, StrategyKind};
use repchain::reputation::EtaPolicy;
use repchain::sim::ScenarioConfig;
use repchain::types::{Block, CollectorId, GovernorId, ProviderId, RoundLists, StakeTransfer, Transaction};

/// Hand-driven two-governor chain, so blocks can be intercepted before
/// replicas see them.
pub struct MiniChain {
    pub registry: KeyRegistry,
    provider: ProviderNode,
    collectors: Vec<CollectorNode>,
    pub governors: Vec<GovernorNode>,
    rng: ChaCha8Rng,
    round: u64,
}

pub struct Proposal {
    pub block: Block,
    pub lists: RoundLists,
    pub leader: usize,
}

impl MiniChain {
    pub fn new(seed: u64) -> Self {
        let mut registry = KeyRegistry::new();
        let pkey = KeyPair::derive(seed, NodeId::Provider(0));
        registry.register(&pkey);
        let slots = vec![CollectorId(0), CollectorId(1), CollectorId(2)];
        let provider = ProviderNode::new(ProviderId(0), pkey, slots.clone(), 4, 0.3, ChaCha8Rng::seed_from_u64(seed));
        let kinds = [StrategyKind::Honest, StrategyKind::AlwaysPlus, StrategyKind::FlipProb(0.3)];
        let collectors = kinds
            .iter()
            .enumerate()
            .map(|(j, &kind)| {
                let key = KeyPair::derive(seed, NodeId::Collector(j as u32));
                registry.register(&key);
                let strategy = CollectorStrategy::new(kind, ChaCha8Rng::seed_from_u64(seed + 1 + j as u64));
                CollectorNode::new(CollectorId(j as u32), key, strategy, vec![ProviderId(0)])
            })
            .collect();
        let params = GovernorParams {
            delta_rounds: 0,
            mu: 1.0,
            b_limit: 3,
            epoch_threshold: 20,
            eta_policy: EtaPolicy::PerEpochSqrt,
        };
        let stakes = StakeTable::from_units(&[2, 1]).unwrap();
        let governors = (0..2)
            .map(|g| {
                let key = KeyPair::derive(seed, NodeId::Governor(g));
                registry.register(&key);
                GovernorNode::new(GovernorId(g), key, std::slice::from_ref(&slots), stakes.clone(), params).unwrap()
            })
            .collect();
        Self {
            registry,
            provider,
            collectors,
            governors,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0xABCD),
            round: 0,
        }
    }

    /// Runs one round up to block proposal and replicates the verification
    /// messages; the block itself is not yet applied anywhere.
    pub fn propose(&mut self) -> Proposal {
        let r = self.round;
        for tx in self.provider.generate(r) {
            for c in &mut self.collectors {
                if let CollectorOutput::Labeled(ltx) = c.process(&tx, &self.registry) {
                    for g in &mut self.governors {
                        let _ = g.on_labeled_tx(&ltx, r, &self.registry);
                    }
                }
            }
        }
        let seed = self.governors[0].ledger().tip_hash();
        let stakes = self.governors[0].ledger().stakes().clone();
        let ann: BTreeMap<_, _> = self
            .governors
            .iter()
            .map(|g| (g.id, announce(g.keypair(), stakes.get(g.id).unwrap(), &seed)))
            .collect();
        let result = elect_leader(&stakes, &seed, &ann, &self.registry).unwrap();
        let leader = result.leader.index();
        let mut due = Vec::new();
        for (i, g) in self.governors.iter_mut().enumerate() {
            g.record_election(&result);
            let expired = g.expire(r);
            if i == leader {
                due = expired;
            }
        }
        let mut msgs: Vec<VerificationMessage> = Vec::new();
        for p in due {
            if let Some((_, Some(msg))) = self.governors[leader].screen(p, &mut self.rng).unwrap() {
                msgs.push(msg);
            }
        }
        let (block, lists) = propose_block(&mut self.governors[leader]);
        let replica = 1 - leader;
        for m in msgs {
            self.governors[replica].on_verification_message(m, &self.registry).unwrap();
        }
        Proposal { block, lists, leader }
    }

    pub fn commit(&mut self, p: &Proposal) {
        for g in &mut self.governors {
            g.on_block(p.block.clone(), Some(&p.lists), &self.registry).unwrap();
        }
        self.provider.on_feedback(&p.block.tx_list, &p.lists.invalid_list, &p.lists.unchecked_list);
        self.round += 1;
    }

    pub fn replica(&mut self, p: &Proposal) -> &mut GovernorNode {
        &mut self.governors[1 - p.leader]
    }
}

fn flip(d: &mut Digest, rng: &mut ChaCha8Rng) {
    d.0[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
}

/// Changes exactly one field of the block, leaving the signature as is.
pub fn tamper(block: &Block, class: usize, rng: &mut ChaCha8Rng, donor: &Transaction) -> Block {
    let mut b = block.clone();
    match class {
        0 => b.serial = b.serial.wrapping_add(rng.gen_range(1..5)),
        1 => b.leader_id = GovernorId(1 - b.leader_id.0),
        2 => {
            if b.tx_list.is_empty() {
                b.tx_list.push(donor.clone());
            } else {
                b.tx_list.remove(rng.gen_range(0..b.tx_list.len()));
            }
        }
        3 => match b.tx_list.first_mut() {
            Some(tx) => tx.timestamp += 1,
            None => b.tx_list.push(donor.clone()),
        },
        4 => flip(&mut b.mt_root, rng),
        5 => flip(&mut b.prev_hash, rng),
        6 => b.transfers.push(StakeTransfer {
            from: GovernorId(0),
            to: GovernorId(1),
            amount: 1,
            round: 0,
            signature: Signature::default(),
        }),
        _ => b.signature.0[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8),
    }
    b
}

pub const MUTATION_CLASSES: usize = 8;

pub fn strategy_kind() -> impl Strategy<Value = StrategyKind> {
    prop_oneof![
        Just(StrategyKind::Honest),
        Just(StrategyKind::AlwaysPlus),
        Just(StrategyKind::AlwaysMinus),
        (0.0..=1.0f64).prop_map(StrategyKind::FlipProb),
        (0.0..=1.0f64).prop_map(StrategyKind::Withhold),
        Just(StrategyKind::Forger),
    ]
}

prop_compose! {
    pub fn scenario()(
        l in 1u32..=2, n in 1u32..=4, m in 1u32..=3, seed in any::<u64>(),
    )(
        topology in proptest::collection::vec(
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n as usize), l as usize),
        strategies in proptest::collection::vec(strategy_kind(), n as usize),
        stakes in proptest::collection::vec(1u64..=3, m as usize),
        threshold in 3u64..=40,
        delta_rounds in 0u64..=2,
        b_limit in 1usize..=12,
        gen_rate in 0u32..=5,
        invalid_fraction in 0.0..=1.0f64,
        total_rounds in 1u64..=30,
        forge_rate in 0u32..=3,
        l in Just(l), n in Just(n), m in Just(m), seed in Just(seed),
    ) -> ScenarioConfig {
        ScenarioConfig {
            seed, l, n, m, topology, strategies, stakes,
            epoch_threshold: threshold,
            eta_policy: EtaPolicy::PerEpochSqrt,
            mu: 1.0, delta_rounds, b_limit, gen_rate, invalid_fraction, total_rounds,
            gen_rounds: None, stake_transfers: Vec::new(), forge_rate,
        }
    }
}

