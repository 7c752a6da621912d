// Exact expected loss of small instances by enumerating every draw, next
// to a Monte-Carlo estimate from the reputation engine.

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repchain::metrics::agreement::compare;
use repchain::metrics::oracle::{exact_expected_loss, OracleInstance};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let uniform = OracleInstance {
        labels: vec![vec![1, -1]],
        validity: vec![false],
        eta: 1.0,
        initial_reps: None,
    };
    let r = exact_expected_loss(&uniform)?;
    println!("one invalid tx, labels (+1, -1): wasted {} loss {}", r.expected_wasted, r.expected_loss);

    // Slot 0 honest, slot 1 always +1, slot 2 missing on the fourth tx.
    let validity = vec![true, false, false, true, false, true];
    let labels = validity
        .iter()
        .enumerate()
        .map(|(t, &v)| vec![if v { 1 } else { -1 }, 1, if t == 3 { 0 } else { 1 }])
        .collect();
    let mixed = OracleInstance {
        labels,
        validity,
        eta: 0.5,
        initial_reps: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cmp = compare(&mixed, 20_000, &mut rng)?;
    let exact = &cmp.exact;
    println!(
        "mixed instance: L_T {:.4} (MC {:.4} ± {:.4}), S_T {:?}, regret {:.4} <= bound {:.4}",
        exact.expected_loss,
        cmp.estimate.loss.mean,
        cmp.estimate.loss.std_err,
        exact.expected_slot_losses,
        exact.regret,
        exact.bound
    );
    assert!(exact.regret <= exact.bound);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
