// Per-epoch regret against the Hedge bound under the doubling schedule,
// and the log-log slope of cumulative regret.

use std::error::Error;

use repchain::metrics::regret::compute_regret;
use repchain::{run, ProviderId, ScenarioConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = ScenarioConfig::from_json(include_str!("../scenarios/adversarial.json"))?;
    let (_, log) = run(config)?;
    let report = compute_regret(&log, ProviderId(0));
    println!("{:>5} {:>6} {:>8} {:>9} {:>9}", "epoch", "T_i", "eta", "regret", "bound");
    for e in report.epochs.iter().filter(|e| e.complete) {
        println!("{:>5} {:>6} {:>8.4} {:>9.2} {:>9.2}", e.epoch_index, e.threshold, e.eta, e.regret, e.bound);
        assert!(e.regret <= e.bound);
    }
    for p in &report.cumulative {
        println!("T_total {:>6}: cumulative regret {:.2}", p.t_total, p.regret);
    }
    println!("log-log slope: {:?}", report.slope);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
