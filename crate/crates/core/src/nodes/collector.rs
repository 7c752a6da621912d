use std::collections::HashSet;

use rand::Rng;

use super::strategy::{CollectorStrategy, StrategyKind};
use crate::crypto::{KeyPair, KeyRegistry, NodeId, Signature};
use crate::types::{CollectorId, Label, LabeledTransaction, ProviderId, Transaction, TxId};

/// Result of handing one transaction to a collector.
#[derive(Debug, Clone, PartialEq)]
pub enum CollectorOutput {
    Labeled(LabeledTransaction),
    Withheld,
    /// Already proven invalid by an earlier broadcast.
    Ignored,
    /// Provider signature did not verify; counted as a dropped forgery.
    BadSignature,
}

#[derive(Debug, Clone)]
pub struct CollectorNode {
    pub id: CollectorId,
    keypair: KeyPair,
    strategy: CollectorStrategy,
    /// Providers this collector is connected to.
    pub providers: Vec<ProviderId>,
    ignored: HashSet<TxId>,
    forged: u64,
}

/// Sequence numbers of fabricated transactions start here so they never
/// collide with a provider's own counter in realistic runs.
const FORGED_SEQ_BASE: u64 = 1 << 62;

/// Cheap local validation. Collectors observe validity directly.
pub fn validate_collector(tx: &Transaction) -> bool {
    tx.ground_truth_valid()
}

impl CollectorNode {
    pub fn new(id: CollectorId, keypair: KeyPair, strategy: CollectorStrategy, providers: Vec<ProviderId>) -> Self {
        Self {
            id,
            keypair,
            strategy,
            providers,
            ignored: HashSet::new(),
            forged: 0,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.strategy.kind
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn is_ignored(&self, id: &TxId) -> bool {
        self.ignored.contains(id)
    }

    pub fn process(&mut self, tx: &Transaction, registry: &KeyRegistry) -> CollectorOutput {
        if !registry.verify_node(NodeId::Provider(tx.provider_id.0), &tx.payload(), &tx.signature) {
            return CollectorOutput::BadSignature;
        }
        if self.ignored.contains(&tx.id()) {
            return CollectorOutput::Ignored;
        }
        let valid = validate_collector(tx);
        match self.strategy.label(valid) {
            Some(label) => CollectorOutput::Labeled(self.sign(tx.clone(), label)),
            None => CollectorOutput::Withheld,
        }
    }

    /// Fabricated transactions for a Forger; empty for every other strategy.
    pub fn forge(&mut self, round: u64, count: u32) -> Vec<LabeledTransaction> {
        if self.strategy.kind != StrategyKind::Forger || self.providers.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| {
                let rng = self.strategy.rng();
                let provider = self.providers[rng.gen_range(0..self.providers.len())];
                let signature = Signature(rng.gen());
                let seq = FORGED_SEQ_BASE + self.forged;
                self.forged += 1;
                let tx = Transaction::with_signature(provider, seq, round, true, signature);
                self.sign(tx, Label::Plus)
            })
            .collect()
    }

    /// Remembers transactions proven invalid by a block broadcast.
    pub fn on_invalid_list(&mut self, invalid: &[Transaction]) {
        self.ignored.extend(invalid.iter().map(Transaction::id));
    }

    fn sign(&self, tx: Transaction, label: Label) -> LabeledTransaction {
        LabeledTransaction::new_signed(&self.keypair, tx, label, self.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        registry: KeyRegistry,
        provider_key: KeyPair,
    }

    fn fixture() -> Fixture {
        let provider_key = KeyPair::derive(3, NodeId::Provider(0));
        let mut registry = KeyRegistry::new();
        registry.register(&provider_key);
        Fixture { registry, provider_key }
    }

    fn collector(kind: StrategyKind, registry: &mut KeyRegistry) -> CollectorNode {
        let kp = KeyPair::derive(3, NodeId::Collector(0));
        registry.register(&kp);
        CollectorNode::new(
            CollectorId(0),
            kp,
            CollectorStrategy::new(kind, ChaCha8Rng::seed_from_u64(1)),
            vec![ProviderId(0)],
        )
    }

    #[test]
    fn honest_labels_valid_plus() {
        let mut f = fixture();
        let mut c = collector(StrategyKind::Honest, &mut f.registry);
        let tx = Transaction::new_signed(&f.provider_key, ProviderId(0), 0, 0, true);
        match c.process(&tx, &f.registry) {
            CollectorOutput::Labeled(l) => {
                assert_eq!(l.label, Label::Plus);
                assert!(f.registry.verify_node(NodeId::Collector(0), &l.payload(), &l.signature));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn always_minus_labels_valid_minus() {
        let mut f = fixture();
        let mut c = collector(StrategyKind::AlwaysMinus, &mut f.registry);
        let tx = Transaction::new_signed(&f.provider_key, ProviderId(0), 0, 0, true);
        assert!(matches!(
            c.process(&tx, &f.registry),
            CollectorOutput::Labeled(LabeledTransaction { label: Label::Minus, .. })
        ));
    }

    #[test]
    fn bad_provider_signature_is_dropped() {
        let mut f = fixture();
        let mut c = collector(StrategyKind::Honest, &mut f.registry);
        let tx = Transaction::with_signature(ProviderId(0), 0, 0, true, Signature([1; 32]));
        assert_eq!(c.process(&tx, &f.registry), CollectorOutput::BadSignature);
    }

    #[test]
    fn proven_invalid_transactions_are_ignored() {
        let mut f = fixture();
        let mut c = collector(StrategyKind::Honest, &mut f.registry);
        let tx = Transaction::new_signed(&f.provider_key, ProviderId(0), 0, 0, false);
        c.on_invalid_list(std::slice::from_ref(&tx));
        assert_eq!(c.process(&tx, &f.registry), CollectorOutput::Ignored);
    }

    #[test]
    fn forgeries_fail_provider_verification() {
        let mut f = fixture();
        let mut c = collector(StrategyKind::Forger, &mut f.registry);
        let forged = c.forge(0, 10_000);
        assert_eq!(forged.len(), 10_000);
        for l in &forged {
            assert!(!f.registry.verify_node(NodeId::Provider(0), &l.tx.payload(), &l.tx.signature));
        }
        let mut honest = collector(StrategyKind::Honest, &mut f.registry);
        assert!(honest.forge(0, 5).is_empty());
    }
}
