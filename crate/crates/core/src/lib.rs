//! Deterministic, single-process testbed in which a simulated blockchain
//! plays serverless roles: event emitter, pay-per-use function substitute,
//! workflow orchestrator, and cross-platform message bus.
//!
//! The chain advances in discrete ticks from a seeded random stream, so every
//! run is reproducible: identical configuration and seed give byte-identical
//! blocks, events, and traces. Around the chain sit simulated
//! function-as-a-service platforms, an integration gateway (invocation,
//! durability monitoring, event subscriptions, and an off-chain call relay),
//! a workflow engine with an on-chain compilation target, and a message bus.
//! The `scenario` module ties these into runnable, validated scenario
//! configurations and a capability matrix.

pub mod canonical;
pub mod contract_vm;
pub mod events;
pub mod faas;
pub mod gateway;
pub mod identity;
pub mod ledger;
pub mod message_bus;
pub mod orchestration;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod state;
pub mod value;

pub use canonical::Digest;
pub use events::{ChainEvent, EventFilter, EventKind};
pub use identity::{AccountRegistry, Address};
pub use value::{Payload, Value};
