// Runs a scenario with a forging collector, audits the resulting chain,
// then shows that editing any committed transaction breaks the hash link.

use std::error::Error;

use repchain::sim::run_audited;
use repchain::types::hash_block;
use repchain::ScenarioConfig;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut config = ScenarioConfig::from_json(include_str!("../scenarios/forgers.json"))?;
    config.total_rounds = 200;
    config.gen_rounds = Some(180);
    config.stake_transfers.clear();
    let outcome = run_audited(config)?;
    let c = &outcome.log.counters;
    println!(
        "height {}, {} forgery attempts, {} dropped by collectors, {} rejected by governors",
        outcome.ledger.height(),
        c.forgery_attempts,
        c.collector_dropped_forgeries,
        c.governor_rejected_forgeries
    );
    println!("audit clean: {}", outcome.audit.is_clean());
    assert!(outcome.audit.is_clean());

    let blocks = outcome.ledger.blocks();
    let (i, block) = blocks
        .iter()
        .enumerate()
        .find(|(_, b)| !b.tx_list.is_empty())
        .ok_or("no transactions committed")?;
    let mut edited = block.clone();
    edited.tx_list[0].timestamp += 1;
    let next = &blocks[i + 1];
    println!("block {} hash matches successor link: {}", block.serial, hash_block(block) == next.prev_hash);
    println!("after editing one tx: {}", hash_block(&edited) == next.prev_hash);
    assert_ne!(hash_block(&edited), next.prev_hash);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
