//! Provider, collector and governor state machines.

pub mod collector;
pub mod governor;
pub mod provider;
pub mod strategy;

pub use collector::{CollectorNode, CollectorOutput};
pub use governor::{GovernorNode, GovernorParams, ScreenDecision, VerificationMessage};
pub use provider::ProviderNode;
pub use strategy::{CollectorStrategy, StrategyKind};
