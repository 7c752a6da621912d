//! Synchronous round scheduler: providers, collectors and governors exchange
//! messages over a bus with one-round delivery.

pub mod audit;
pub mod bus;
pub mod config;
pub mod engine;

pub use audit::{audit_chain, run_audited, Audit, RunOutcome};
pub use bus::{Channel, MessageBus};
pub use config::{ConfigError, ScenarioConfig, TransferSpec};
pub use engine::{run, substream, SimError, Simulation};
