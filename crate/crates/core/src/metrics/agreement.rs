//! Monte-Carlo estimates of the oracle quantities, produced by the real
//! screening path, and a generator for small test instances.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{exact_expected_loss, OracleError, OracleInstance, OracleResult};
use crate::nodes::governor::screen_labels;
use crate::reputation::{EtaPolicy, ReputationState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub std_err: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }

    /// `|mean - exact| <= k * std_err`. A zero standard error demands
    /// agreement to rounding.
    pub fn agrees(&self, exact: f64, k: f64) -> bool {
        let gap = (self.mean - exact).abs();
        if self.std_err == 0.0 {
            gap <= 1e-9 * exact.abs().max(1.0)
        } else {
            gap <= k * self.std_err
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub loss: Estimate,
    pub wasted: Estimate,
}

/// Replays the instance `runs` times through [`screen_labels`] with a fresh
/// reputation state each time. The epoch threshold is set past the instance
/// length so the learning rate stays fixed.
pub fn monte_carlo<R: Rng + ?Sized>(instance: &OracleInstance, runs: usize, rng: &mut R) -> MonteCarlo {
    let rows = instance.label_rows();
    let slots = instance.slots();
    let mut losses = Vec::with_capacity(runs);
    let mut wasted = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut state = ReputationState::new(slots, u64::MAX / 2, EtaPolicy::Fixed(instance.eta))
            .expect("instance has slots and a positive rate");
        if let Some(reps) = &instance.initial_reps {
            state = state.with_reps(reps.clone());
        }
        let (mut loss, mut waste) = (0.0, 0.0);
        for (labels, &valid) in rows.iter().zip(&instance.validity) {
            let d = screen_labels(&mut state, labels, || valid, 1.0, rng).expect("valid state");
            loss += d.proof_loss;
            if d.verdict.is_some() && !valid {
                waste += 1.0;
            }
        }
        losses.push(loss);
        wasted.push(waste);
    }
    MonteCarlo {
        loss: Estimate::from_samples(&losses),
        wasted: Estimate::from_samples(&wasted),
    }
}

/// Every instance with `u = 2` and `T <= 4` over labels {+1, −1, absent}
/// and both validities, at the given learning rate.
pub fn exhaustive_two_slot(eta: f64) -> Vec<OracleInstance> {
    let mut out = Vec::new();
    // Per transaction: 3 * 3 label pairs times 2 validities.
    const CHOICES: usize = 18;
    for t in 1..=4u32 {
        for code in 0..CHOICES.pow(t) {
            let mut rest = code;
            let mut labels = Vec::new();
            let mut validity = Vec::new();
            for _ in 0..t {
                let c = rest % CHOICES;
                rest /= CHOICES;
                let decode = |x: usize| [1i8, -1, 0][x];
                labels.push(vec![decode(c % 3), decode((c / 3) % 3)]);
                validity.push(c / 9 == 1);
            }
            out.push(OracleInstance {
                labels,
                validity,
                eta,
                initial_reps: None,
            });
        }
    }
    out
}

/// A random instance with `u <= max_slots` and `T <= max_len`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_slots: usize, max_len: usize) -> OracleInstance {
    let u = rng.gen_range(1..=max_slots);
    let t = rng.gen_range(1..=max_len);
    let labels = (0..t)
        .map(|_| (0..u).map(|_| *[1i8, -1, 0].choose(rng).expect("nonempty")).collect())
        .collect();
    let validity = (0..t).map(|_| rng.gen_bool(0.5)).collect();
    let eta = *[0.1, 0.5, 1.0, 2.0].choose(rng).expect("nonempty");
    OracleInstance {
        labels,
        validity,
        eta,
        initial_reps: None,
    }
}

/// Exact oracle next to a Monte-Carlo estimate for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub exact: OracleResult,
    pub estimate: MonteCarlo,
}

impl Comparison {
    pub fn within(&self, k: f64) -> bool {
        self.estimate.loss.agrees(self.exact.expected_loss, k)
            && self.estimate.wasted.agrees(self.exact.expected_wasted, k)
    }
}

pub fn compare<R: Rng + ?Sized>(instance: &OracleInstance, runs: usize, rng: &mut R) -> Result<Comparison, OracleError> {
    Ok(Comparison {
        exact: exact_expected_loss(instance)?,
        estimate: monte_carlo(instance, runs, rng),
    })
}
