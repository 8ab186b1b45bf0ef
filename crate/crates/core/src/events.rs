//! Chain event taxonomy.
//!
//! Every event recorded in a block carries one of five kinds:
//!
//! * `Consensus` — block production notices emitted by the chain itself.
//! * `ContractState` — a contract announcing a state change.
//! * `BusinessLogic` — domain-level occurrences such as workflow progress.
//! * `ExternalCallRequested` — a contract asking an off-chain relay to act.
//! * `Integration` — cross-platform messages carried by a bus contract.

use crate::canonical::Digest;
use crate::value::Payload;
use serde::{Deserialize, Serialize};

pub type EventId = Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Consensus,
    ContractState,
    BusinessLogic,
    ExternalCallRequested,
    Integration,
}

/// An event as stored in a block. `event_id` is a content digest: for
/// contract events it covers the emitting transaction, the event's position
/// within it, and the payload, so re-execution of the same transaction after
/// a fork reproduces the same id and downstream consumers can deduplicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEvent {
    pub event_id: EventId,
    pub kind: EventKind,
    /// Emitting contract address, or `"system"` for consensus events.
    pub emitter: String,
    pub name: String,
    pub payload: Payload,
    pub block_height: u64,
    /// Absent for consensus events.
    pub tx_id: Option<Digest>,
}

/// Predicate over chain events. Empty filter matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EventKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Scalar equality constraints on payload fields.
    #[serde(default, skip_serializing_if = "Payload::is_empty")]
    pub payload_eq: Payload,
}

impl EventFilter {
    pub fn by_name(name: impl Into<String>) -> EventFilter {
        EventFilter {
            name: Some(name.into()),
            ..EventFilter::default()
        }
    }

    pub fn matches(&self, event: &ChainEvent) -> bool {
        if let Some(kind) = self.kind {
            if event.kind != kind {
                return false;
            }
        }
        if let Some(emitter) = &self.emitter {
            if event.emitter != *emitter {
                return false;
            }
        }
        if let Some(name) = &self.name {
            if event.name != *name {
                return false;
            }
        }
        self.payload_eq
            .iter()
            .all(|(k, v)| event.payload.get(k) == Some(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn sample() -> ChainEvent {
        ChainEvent {
            event_id: Digest::of_bytes(b"e"),
            kind: EventKind::ContractState,
            emitter: "aaaa".into(),
            name: "CountChanged".into(),
            payload: [("value".to_string(), Value::Int(1))].into_iter().collect(),
            block_height: 3,
            tx_id: None,
        }
    }

    #[test]
    fn empty_filter_matches() {
        assert!(EventFilter::default().matches(&sample()));
    }

    #[test]
    fn filter_dimensions() {
        let e = sample();
        assert!(EventFilter::by_name("CountChanged").matches(&e));
        assert!(!EventFilter::by_name("Other").matches(&e));
        let mut f = EventFilter::default();
        f.kind = Some(EventKind::Consensus);
        assert!(!f.matches(&e));
        let mut f = EventFilter::default();
        f.payload_eq.insert("value".into(), Value::Int(1));
        assert!(f.matches(&e));
        f.payload_eq.insert("value".into(), Value::Int(2));
        assert!(!f.matches(&e));
    }
}
