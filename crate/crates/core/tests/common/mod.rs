#![allow(dead_code)]

pub mod chain;

use std::path::PathBuf;

use repchain::metrics::report::emit_csv;
use repchain::metrics::regret::compute_regret;
use repchain::sim::ScenarioConfig;
use repchain::{Ledger, MetricsLog, ProviderId};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Both CSV tables and the ledger export, as bytes.
pub fn artifacts(ledger: &Ledger, log: &MetricsLog) -> (Vec<u8>, Vec<u8>, String) {
    let reports: Vec<_> = (0..log.slots.len())
        .map(|p| compute_regret(log, ProviderId(p as u32)))
        .collect();
    let (mut rounds, mut epochs) = (Vec::new(), Vec::new());
    emit_csv(log, &reports, &mut rounds, &mut epochs).unwrap();
    (rounds, epochs, ledger.export_lines())
}
