use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::KeyPair;
use crate::types::{CollectorId, ProviderId, Transaction, TxId};

/// A transaction source. Keeps its own valid transactions pending until they
/// reach the chain and resubmits those that were discarded unverified.
#[derive(Debug, Clone)]
pub struct ProviderNode {
    pub id: ProviderId,
    keypair: KeyPair,
    pub collectors: Vec<CollectorId>,
    pub gen_rate: u32,
    pub invalid_fraction: f64,
    pending: BTreeMap<TxId, Transaction>,
    next_seq: u64,
    rng: ChaCha8Rng,
}

impl ProviderNode {
    pub fn new(
        id: ProviderId,
        keypair: KeyPair,
        collectors: Vec<CollectorId>,
        gen_rate: u32,
        invalid_fraction: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            id,
            keypair,
            collectors,
            gen_rate,
            invalid_fraction,
            pending: BTreeMap::new(),
            next_seq: 0,
            rng,
        }
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn pending(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.values()
    }

    pub fn is_pending(&self, id: &TxId) -> bool {
        self.pending.contains_key(id)
    }

    /// Creates `gen_rate` signed transactions stamped with `round`. Each is
    /// ground-truth invalid with probability `invalid_fraction`.
    pub fn generate(&mut self, round: u64) -> Vec<Transaction> {
        (0..self.gen_rate)
            .map(|_| {
                let valid = !self.rng.gen_bool(self.invalid_fraction);
                let tx = Transaction::new_signed(&self.keypair, self.id, self.next_seq, round, valid);
                self.next_seq += 1;
                if valid {
                    self.pending.insert(tx.id(), tx.clone());
                }
                tx
            })
            .collect()
    }

    /// Reacts to a block's broadcast. Included transactions leave `pending`,
    /// verified-invalid ones are dropped, and pending transactions found in
    /// `unchecked` are returned for resubmission.
    pub fn on_feedback(
        &mut self,
        included: &[Transaction],
        invalid_list: &[Transaction],
        unchecked_list: &[Transaction],
    ) -> Vec<Transaction> {
        for tx in included.iter().chain(invalid_list) {
            self.pending.remove(&tx.id());
        }
        let mut seen = HashSet::new();
        unchecked_list
            .iter()
            .filter(|tx| tx.provider_id == self.id && seen.insert(tx.id()))
            .filter_map(|tx| self.pending.get(&tx.id()).cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::NodeId;
    use rand::SeedableRng;

    fn provider(gen_rate: u32, invalid_fraction: f64) -> ProviderNode {
        ProviderNode::new(
            ProviderId(0),
            KeyPair::derive(1, NodeId::Provider(0)),
            vec![CollectorId(0)],
            gen_rate,
            invalid_fraction,
            ChaCha8Rng::seed_from_u64(8),
        )
    }

    #[test]
    fn zero_rate_generates_nothing() {
        assert!(provider(0, 0.5).generate(0).is_empty());
    }

    #[test]
    fn all_valid_when_invalid_fraction_is_zero() {
        let mut p = provider(5, 0.0);
        let txs = p.generate(3);
        assert_eq!(txs.len(), 5);
        assert!(txs.iter().all(|t| t.ground_truth_valid() && t.timestamp == 3));
        assert_eq!(p.pending().count(), 5);
    }

    #[test]
    fn invalid_fraction_is_binomial() {
        let mut p = provider(10_000, 0.5);
        let invalid = p.generate(0).iter().filter(|t| !t.ground_truth_valid()).count();
        assert!((invalid as i64 - 5_000).abs() <= 150, "invalid = {invalid}");
    }

    #[test]
    fn unchecked_pending_is_resubmitted_every_time() {
        let mut p = provider(1, 0.0);
        let t1 = p.generate(0).remove(0);
        for _ in 0..3 {
            let again = p.on_feedback(&[], &[], std::slice::from_ref(&t1));
            assert_eq!(again, vec![t1.clone()]);
        }
    }

    #[test]
    fn included_transactions_are_not_resubmitted() {
        let mut p = provider(1, 0.0);
        let t1 = p.generate(0).remove(0);
        assert!(p.on_feedback(std::slice::from_ref(&t1), &[], &[]).is_empty());
        assert!(p.on_feedback(&[], &[], std::slice::from_ref(&t1)).is_empty());
        assert!(!p.is_pending(&t1.id()));
    }

    #[test]
    fn invalid_list_drops_pending() {
        let mut p = provider(1, 0.0);
        let t1 = p.generate(0).remove(0);
        p.on_feedback(&[], std::slice::from_ref(&t1), &[]);
        assert!(p.on_feedback(&[], &[], std::slice::from_ref(&t1)).is_empty());
    }
}
