//! Post-run safety audit.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::engine::{SimError, Simulation};
use crate::consensus::Ledger;
use crate::crypto::{KeyRegistry, NodeId};
use crate::metrics::MetricsLog;
use crate::types::hash_block;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub chain_breaks: Vec<String>,
    pub forged_on_chain: usize,
    pub duplicate_on_chain: usize,
    pub conservation: Option<String>,
    pub agreement_violations: u64,
    pub synchrony_violations: u64,
    pub replica_rejections: u64,
}

impl Audit {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.chain_breaks.clone();
        if self.forged_on_chain > 0 {
            out.push(format!("{} forged transactions on chain", self.forged_on_chain));
        }
        if self.duplicate_on_chain > 0 {
            out.push(format!("{} duplicate transactions on chain", self.duplicate_on_chain));
        }
        if let Some(c) = &self.conservation {
            out.push(format!("conservation: {c}"));
        }
        for (n, what) in [
            (self.agreement_violations, "agreement violations"),
            (self.synchrony_violations, "late deliveries"),
            (self.replica_rejections, "replica rejections"),
        ] {
            if n > 0 {
                out.push(format!("{n} {what}"));
            }
        }
        out
    }

    pub fn is_clean(&self) -> bool {
        self.violations().is_empty()
    }
}

/// Walks the chain from genesis checking serials, hash links, leader
/// signatures and provider signatures.
pub fn audit_chain(ledger: &Ledger, registry: &KeyRegistry) -> Audit {
    let mut audit = Audit::default();
    let blocks = ledger.blocks();
    let mut seen = HashSet::new();
    for (i, pair) in blocks.windows(2).enumerate() {
        let (prev, block) = (&pair[0], &pair[1]);
        if block.serial != i as u64 + 1 {
            audit.chain_breaks.push(format!("block {i} has serial {}", block.serial));
        }
        if block.prev_hash != hash_block(prev) {
            audit.chain_breaks.push(format!("block {} does not link to its parent", block.serial));
        }
        if !registry.verify_node(NodeId::Governor(block.leader_id.0), &hash_block(block).0, &block.signature) {
            audit.chain_breaks.push(format!("block {} has a bad leader signature", block.serial));
        }
        for tx in &block.tx_list {
            if !registry.verify_node(NodeId::Provider(tx.provider_id.0), &tx.payload(), &tx.signature) {
                audit.forged_on_chain += 1;
            }
            if !seen.insert(tx.id()) {
                audit.duplicate_on_chain += 1;
            }
        }
    }
    audit
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub ledger: Ledger,
    pub log: MetricsLog,
    pub audit: Audit,
}

/// [`run`](super::run) followed by the chain, conservation and replication
/// audits.
pub fn run_audited(config: ScenarioConfig) -> Result<RunOutcome, SimError> {
    let seed = config.seed;
    let mut sim = Simulation::new(config)?;
    for _ in 0..sim.config().total_rounds {
        sim.step_round()?;
    }
    sim.finish();
    let mut audit = audit_chain(sim.ledger(), sim.registry());
    audit.conservation = sim.conservation_check().err();
    let counters = &sim.log().counters;
    audit.agreement_violations = counters.agreement_violations;
    audit.synchrony_violations = counters.synchrony_violations;
    audit.replica_rejections = counters.replica_rejections;
    let (ledger, log) = sim.into_parts();
    Ok(RunOutcome {
        seed,
        ledger,
        log,
        audit,
    })
}
