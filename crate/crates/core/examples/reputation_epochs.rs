// One provider, two collectors: an honest one and one that labels every
// transaction +1. Shows the penalty counts, selection probabilities and
// the revenue split at each epoch end.

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use repchain::reputation::{draw_collector, EtaPolicy, ReputationState, Verdict};
use repchain::Label;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = ReputationState::new(2, 50, EtaPolicy::PerEpochSqrt)?;
    let mut epochs = 0;
    let mut draws = [0u32; 2];
    while epochs < 4 {
        let valid = rng.gen_bool(0.5);
        let labels = [Some(Label::from_validity(valid)), Some(Label::Plus)];
        let k = draw_collector(&state.probabilities(), &mut rng);
        draws[k] += 1;
        // A -1 label from the drawn slot discards the tx unverified.
        if labels[k] != Some(Label::Plus) {
            continue;
        }
        state.update_reputations(&labels, Verdict::from_validity(valid));
        let reps = state.reps().to_vec();
        if let Some(report) = state.maybe_advance_epoch(1.0)? {
            epochs += 1;
            println!(
                "epoch {} done: reps {:?}, shares [{:.3}, {:.3}], next T = {}, eta = {:.4}",
                report.epoch_index,
                reps,
                report.shares[0],
                report.shares[1],
                state.epoch_threshold(),
                state.eta()
            );
        }
    }
    println!("draws per slot: {draws:?}");
    assert!(draws[0] > draws[1]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
