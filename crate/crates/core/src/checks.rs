//! Pass/fail checks evaluated over finished runs.

use std::fmt;

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::agreement::{compare, exhaustive_two_slot, random_instance};
use crate::metrics::oracle::exact_expected_loss;
use crate::metrics::regret::{compute_regret, RegretReport};
use crate::nodes::StrategyKind;
use crate::sim::{RunOutcome, ScenarioConfig};
use crate::types::ProviderId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    RegretBound,
    Scaling,
    Properties,
    OracleAgreement,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CheckKind::RegretBound => "regret-bound",
            CheckKind::Scaling => "scaling",
            CheckKind::Properties => "properties",
            CheckKind::OracleAgreement => "oracle-agreement",
        };
        f.write_str(name)
    }
}

/// One inequality `lhs <= rhs` that a check evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub what: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Margin {
    fn new(what: String, lhs: f64, rhs: f64) -> Self {
        Self {
            what,
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub passed: bool,
    pub failures: Vec<String>,
    pub margins: Vec<Margin>,
}

impl CheckResult {
    fn from_parts(check: CheckKind, mut failures: Vec<String>, margins: Vec<Margin>) -> Self {
        failures.extend(
            margins
                .iter()
                .filter(|m| !m.holds())
                .map(|m| format!("{}: {} > {}", m.what, m.lhs, m.rhs)),
        );
        Self {
            check,
            passed: failures.is_empty(),
            failures,
            margins,
        }
    }
}

pub fn reports_for(outcome: &RunOutcome) -> Vec<RegretReport> {
    (0..outcome.log.slots.len())
        .map(|i| compute_regret(&outcome.log, ProviderId(i as u32)))
        .collect()
}

/// Every epoch of every provider satisfies `regret <= ln u / eta + eta T / 2`.
pub fn regret_bound(runs: &[(u64, Vec<RegretReport>)]) -> CheckResult {
    let mut margins = Vec::new();
    for (seed, reports) in runs {
        for r in reports {
            for e in &r.epochs {
                margins.push(Margin::new(
                    format!("seed {seed} provider {} epoch {} regret <= bound", r.provider, e.epoch_index),
                    e.regret,
                    e.bound,
                ));
            }
        }
    }
    CheckResult::from_parts(CheckKind::RegretBound, Vec::new(), margins)
}

pub const SLOPE_RANGE: (f64, f64) = (0.35, 0.65);
pub const MIN_SCALING_EPOCHS: usize = 4;

/// Seed-averaged log-log slope of cumulative regret per provider.
pub fn scaling(runs: &[(u64, Vec<RegretReport>)]) -> CheckResult {
    let mut failures = Vec::new();
    let mut margins = Vec::new();
    let providers = runs.first().map_or(0, |(_, r)| r.len());
    for p in 0..providers {
        let mut slopes = Vec::new();
        for (seed, reports) in runs {
            let report = &reports[p];
            if report.cumulative.len() < MIN_SCALING_EPOCHS {
                failures.push(format!(
                    "seed {seed} provider {p}: {} complete epochs, need {MIN_SCALING_EPOCHS}",
                    report.cumulative.len()
                ));
                continue;
            }
            match report.slope {
                Some(s) => slopes.push(s),
                None => failures.push(format!("seed {seed} provider {p}: slope undefined (zero regret)")),
            }
        }
        if slopes.is_empty() {
            continue;
        }
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        margins.push(Margin::new(format!("provider {p} mean slope >= {}", SLOPE_RANGE.0), SLOPE_RANGE.0, mean));
        margins.push(Margin::new(format!("provider {p} mean slope <= {}", SLOPE_RANGE.1), mean, SLOPE_RANGE.1));
    }
    CheckResult::from_parts(CheckKind::Scaling, failures, margins)
}

/// Safety audit, conservation, and zero penalties for every Honest slot.
pub fn properties(config: &ScenarioConfig, runs: &[RunOutcome]) -> CheckResult {
    let mut failures = Vec::new();
    for run in runs {
        failures.extend(run.audit.violations().into_iter().map(|v| format!("seed {}: {v}", run.seed)));
        for (p, slots) in config.topology.iter().enumerate() {
            for (k, &c) in slots.iter().enumerate() {
                if config.strategies[c as usize] != StrategyKind::Honest {
                    continue;
                }
                let penalised: u64 = run
                    .log
                    .screenings_for(ProviderId(p as u32))
                    .map(|s| s.deltas[k].unsigned_abs())
                    .sum();
                if penalised > 0 {
                    failures.push(format!(
                        "seed {}: honest collector {c} penalised {penalised} times by provider {p}",
                        run.seed
                    ));
                }
            }
        }
    }
    CheckResult::from_parts(CheckKind::Properties, failures, Vec::new())
}

/// Parameters for the oracle-agreement corpus.
#[derive(Debug, Clone, Copy)]
pub struct OracleCorpus {
    pub seed: u64,
    pub random_instances: usize,
    pub max_slots: usize,
    pub max_len: usize,
    pub monte_carlo_runs: usize,
    pub sigmas: f64,
}

impl Default for OracleCorpus {
    fn default() -> Self {
        Self {
            seed: 0x0AC1E,
            random_instances: 200,
            max_slots: 3,
            max_len: 10,
            monte_carlo_runs: 20_000,
            sigmas: 3.0,
        }
    }
}

/// Exact bound check on every two-slot instance with `T <= 4` and on a
/// random corpus, plus Monte-Carlo agreement on the random corpus.
pub fn oracle_agreement(corpus: &OracleCorpus) -> CheckResult {
    let mut failures = Vec::new();
    let mut margins = Vec::new();
    for eta in [0.25, 1.0] {
        let mut worst: Option<Margin> = None;
        for (i, inst) in exhaustive_two_slot(eta).iter().enumerate() {
            let exact = exact_expected_loss(inst).expect("corpus instances are in range");
            let m = Margin::new(format!("exhaustive eta {eta} #{i} regret <= bound"), exact.regret, exact.bound);
            // Only the tightest instance is kept; it fails whenever any does.
            if worst.as_ref().is_none_or(|w| m.margin < w.margin) {
                worst = Some(m);
            }
        }
        margins.extend(worst);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed);
    for i in 0..corpus.random_instances {
        let inst = random_instance(&mut rng, corpus.max_slots, corpus.max_len);
        let c = compare(&inst, corpus.monte_carlo_runs, &mut rng).expect("corpus instances are in range");
        margins.push(Margin::new(format!("random #{i} regret <= bound"), c.exact.regret, c.exact.bound));
        if !c.within(corpus.sigmas) {
            failures.push(format!(
                "random #{i}: Monte-Carlo loss {} ± {} vs exact {}; wasted {} ± {} vs exact {}",
                c.estimate.loss.mean,
                c.estimate.loss.std_err,
                c.exact.expected_loss,
                c.estimate.wasted.mean,
                c.estimate.wasted.std_err,
                c.exact.expected_wasted
            ));
        }
    }
    CheckResult::from_parts(CheckKind::OracleAgreement, failures, margins)
}
