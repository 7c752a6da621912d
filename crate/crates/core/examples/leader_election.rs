// Stake-weighted leader election: governor 0 holds 3 stake units and
// governor 1 holds 1. Each unit gets a VRF ticket and the lowest wins.

use std::collections::BTreeMap;
use std::error::Error;

use repchain::consensus::{announce, elect_leader};
use repchain::crypto::{hash, Digest};
use repchain::{GovernorId, KeyPair, KeyRegistry, NodeId, StakeTable};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let stakes = StakeTable::from_units(&[3, 1])?;
    let mut registry = KeyRegistry::new();
    let keys: Vec<KeyPair> = (0..2).map(|g| KeyPair::derive(9, NodeId::Governor(g))).collect();
    for k in &keys {
        registry.register(k);
    }

    let rounds = 10_000;
    let mut wins = [0u32; 2];
    let mut seed = Digest::default();
    for _ in 0..rounds {
        let tickets: BTreeMap<_, _> = keys
            .iter()
            .enumerate()
            .map(|(g, k)| {
                let id = GovernorId(g as u32);
                (id, announce(k, stakes.get(id).unwrap_or(0), &seed))
            })
            .collect();
        let result = elect_leader(&stakes, &seed, &tickets, &registry)?;
        wins[result.leader.index()] += 1;
        seed = hash(&seed.0);
    }
    let share = f64::from(wins[0]) / f64::from(rounds);
    let se = (0.75f64 * 0.25 / f64::from(rounds)).sqrt();
    println!("wins {wins:?}, governor 0 share {share:.4} (expected 0.75 ± {:.4})", 3.0 * se);
    assert!((share - 0.75).abs() < 3.0 * se);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
