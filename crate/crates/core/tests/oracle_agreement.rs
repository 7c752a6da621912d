use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repchain::checks::{oracle_agreement, OracleCorpus};
use repchain::metrics::agreement::{compare, exhaustive_two_slot, monte_carlo};
use repchain::metrics::oracle::{exact_expected_loss, OracleInstance};
use repchain::metrics::regret::hedge_bound;

fn instance(labels: Vec<Vec<i8>>, validity: Vec<bool>, eta: f64) -> OracleInstance {
    OracleInstance {
        labels,
        validity,
        eta,
        initial_reps: None,
    }
}

#[test]
fn every_two_slot_instance_up_to_four_txs_respects_the_bound() {
    for eta in [0.1, 0.25, 0.5, 1.0, 2.0] {
        for inst in exhaustive_two_slot(eta) {
            let r = exact_expected_loss(&inst).unwrap();
            assert!(r.regret <= r.bound + 1e-12, "{inst:?}: {} > {}", r.regret, r.bound);
            assert!((r.bound - hedge_bound(2, eta, inst.transactions() as u64)).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_instance_matches_hand_values() {
    let r = exact_expected_loss(&instance(vec![vec![1, -1]], vec![false], 1.0)).unwrap();
    assert!((r.expected_wasted - 0.5).abs() < 1e-12);
    assert!((r.expected_loss - 0.25).abs() < 1e-12);
    assert_eq!(r.min_slot_loss, 0.0);
}

#[test]
fn agreeing_collectors_are_never_penalized() {
    let r = exact_expected_loss(&instance(vec![vec![1, 1, 1]; 6], vec![true; 6], 0.7)).unwrap();
    assert_eq!(r.expected_loss, 0.0);
    assert!(r.expected_slot_losses.iter().all(|&s| s == 0.0));
}

#[test]
fn monte_carlo_agrees_with_the_oracle_on_a_mixed_instance() {
    let inst = instance(
        vec![vec![1, -1, 1], vec![-1, -1, 1], vec![1, 1, -1], vec![1, -1, 0], vec![-1, 1, 1]],
        vec![true, false, false, true, true],
        0.8,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cmp = compare(&inst, 50_000, &mut rng).unwrap();
    assert!(cmp.within(3.0), "{cmp:?}");

    let mc = monte_carlo(&inst, 50_000, &mut rng);
    let exact = exact_expected_loss(&inst).unwrap();
    assert!(mc.wasted.agrees(exact.expected_wasted, 3.0), "{:?} vs {}", mc.wasted, exact.expected_wasted);
}

#[test]
fn corpus_check_passes_on_a_small_corpus() {
    let corpus = OracleCorpus {
        seed: 99,
        random_instances: 40,
        monte_carlo_runs: 5_000,
        ..OracleCorpus::default()
    };
    let result = oracle_agreement(&corpus);
    assert!(result.margins.len() >= 40);
    assert!(result.passed, "{:?}", result.failures);
}
