// Runs the four-collector adversarial scenario round by round and reports
// how each strategy fared.

use std::error::Error;

use repchain::metrics::regret::compute_regret;
use repchain::{ProviderId, ScenarioConfig, Simulation};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut config = ScenarioConfig::from_json(include_str!("../scenarios/adversarial.json"))?;
    config.gen_rounds = Some(150);
    config.total_rounds = 170;
    let mut sim = Simulation::new(config.clone())?;
    while sim.round() < config.total_rounds {
        sim.step_round()?;
        if sim.round() % 50 == 0 {
            println!("round {:>3}: height {}, state {}", sim.round(), sim.ledger().height(), sim.state_hash());
        }
    }
    sim.finish();
    sim.conservation_check()?;

    let log = sim.log();
    let report = compute_regret(log, ProviderId(0));
    let totals = report.epochs.iter().fold(vec![0u64; 4], |mut acc, e| {
        for (a, s) in acc.iter_mut().zip(&e.slot_losses) {
            *a += s;
        }
        acc
    });
    for (kind, penalties) in config.strategies.iter().zip(&totals) {
        println!("{kind:?}: {penalties} penalties");
    }
    println!(
        "{} txs on chain, median latency {:?}, inclusion {:.3}, {} withheld labels",
        sim.ledger().tx_count(),
        log.median_latency(),
        log.valid_inclusion_rate(),
        log.counters.withheld
    );
    assert_eq!(totals[0], 0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
