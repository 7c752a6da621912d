//! Deterministic simulator for a three-tier permissioned blockchain in which
//! governors screen transactions by sampling one collector label per
//! transaction, weighted by a Hedge-style reputation.
//!
//! Providers sign transactions, collectors label them +1 or −1 and forward
//! them, and a stake-weighted VRF elects one governor per round to screen
//! and commit a block. The crate exposes each layer directly (hashing and
//! simulated signatures, Merkle commitments, the reputation engine, node
//! state machines, consensus and validation) plus a round scheduler, regret
//! accounting and an exact small-instance oracle.
//!
//! ```
//! use repchain::reputation::selection_probabilities;
//!
//! let p = selection_probabilities(&[0, -1], 2f64.ln()).unwrap();
//! assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
//! ```
//!
//! See `examples/` for one runnable program per capability.

pub mod checks;
pub mod cli;
pub mod codec;
pub mod consensus;
pub mod crypto;
pub mod merkle;
pub mod metrics;
pub mod nodes;
pub mod reputation;
pub mod sim;
pub mod types;

pub use consensus::{Ledger, StakeTable};
pub use crypto::{Digest, KeyPair, KeyRegistry, NodeId};
pub use metrics::MetricsLog;
pub use sim::{run, ScenarioConfig, Simulation};
pub use types::{Block, CollectorId, GovernorId, Label, ProviderId, Transaction};
