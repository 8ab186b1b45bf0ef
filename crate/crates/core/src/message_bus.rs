//! Blockchain as a message bus between processes on different platforms.
//!
//! A minimal bus contract turns `publish` transactions into `Integration`
//! events; one [`MessageRouter`] per platform tails the chain, picks out the
//! messages addressed to its platform, and enqueues them on the local
//! function runtime. Because every message is a chain event, the bus
//! inherits the ledger's properties wholesale: a total delivery order
//! (height, then intra-block position), sender attribution via transaction
//! signatures, replayability, and — with content-derived event ids —
//! exactly-once delivery even when the chain reorganizes underneath the
//! routers.

use crate::contract_vm::expr::Expr;
use crate::contract_vm::{Action, ContractDefinition, FunctionDef, GuardedCommand, ParamType};
use crate::events::{EventFilter, EventId, EventKind};
use crate::faas::FaasPlatform;
use crate::identity::Address;
use crate::ledger::{ChainConfig, Node};
use crate::value::{Payload, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Event name the bus contract emits for every published message.
pub const BUS_MESSAGE_EVENT: &str = "BusMessage";

/// The bus contract: `publish(target_platform, target_function, payload)`
/// where `payload` is a canonically encoded JSON object. The contract holds
/// no state; its only job is to stamp the message into a block with the
/// publisher's verified sender address.
pub fn bus_contract() -> ContractDefinition {
    let publish = FunctionDef {
        params: vec![ParamType::Str, ParamType::Str, ParamType::Str],
        body: vec![GuardedCommand {
            guard: Expr::lit(true),
            actions: vec![
                Action::Emit {
                    kind: EventKind::Integration,
                    name: BUS_MESSAGE_EVENT.into(),
                    payload: [
                        ("platform".to_string(), Expr::arg(0)),
                        ("function".to_string(), Expr::arg(1)),
                        ("payload".to_string(), Expr::arg(2)),
                        ("sender".to_string(), Expr::Sender),
                    ]
                    .into_iter()
                    .collect(),
                },
                Action::Return(None),
            ],
        }],
    };
    ContractDefinition {
        functions: [("publish".to_string(), publish)].into_iter().collect(),
        restricted: Default::default(),
    }
}

/// Maps chain accounts to the platform that owns them, so deliveries can
/// name their source platform and not just a raw address.
#[derive(Debug, Clone, Default)]
pub struct ProcessDirectory {
    by_address: BTreeMap<String, String>,
}

impl ProcessDirectory {
    pub fn register(&mut self, account: &Address, platform_id: &str) {
        self.by_address
            .insert(account.to_string(), platform_id.to_string());
    }

    pub fn platform_of(&self, address: &str) -> Option<&str> {
        self.by_address.get(address).map(String::as_str)
    }
}

/// A message the router could not hand to a local function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub message_id: EventId,
    pub reason: String,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusDeliveryRecord {
    pub tick: u64,
    pub message_id: EventId,
    pub height: u64,
    pub function: String,
    pub source_platform: String,
}

/// Chain-tailing delivery agent for one platform.
///
/// The router keeps a cursor of fully processed heights and re-scans the
/// last `stable_depth` blocks every cycle, deduplicating on event id, so a
/// message whose block is replaced by a fork is delivered exactly once no
/// matter how often its transaction moves between blocks.
#[derive(Debug, Clone)]
pub struct MessageRouter {
    pub platform_id: String,
    min_confirmations: u64,
    stable_depth: u64,
    cursor: u64,
    delivered: BTreeMap<EventId, u64>,
    dead_letters: Vec<DeadLetter>,
    deliveries: Vec<BusDeliveryRecord>,
}

impl MessageRouter {
    /// `min_confirmations` is floored to 1 (nothing can be delivered before
    /// it is in a block). Messages from the whole chain history are
    /// delivered, starting at height 1.
    pub fn new(platform_id: &str, min_confirmations: u64, stable_depth: u64) -> MessageRouter {
        MessageRouter {
            platform_id: platform_id.to_string(),
            min_confirmations: min_confirmations.max(1),
            stable_depth,
            cursor: 0,
            delivered: BTreeMap::new(),
            dead_letters: Vec::new(),
            deliveries: Vec::new(),
        }
    }

    /// Router tuned to a chain: optimistic delivery at one confirmation,
    /// re-scan window as deep as the chain can reorganize.
    pub fn for_chain(platform_id: &str, config: &ChainConfig) -> MessageRouter {
        MessageRouter::new(platform_id, 1, config.max_reorg_depth)
    }

    pub fn dead_letters(&self) -> &[DeadLetter] {
        &self.dead_letters
    }

    pub fn delivery_log(&self) -> &[BusDeliveryRecord] {
        &self.deliveries
    }

    /// Scans newly confirmed blocks and enqueues matching messages on
    /// `platform`. Returns the number of messages delivered this cycle.
    pub fn route_cycle(
        &mut self,
        node: &Node,
        platform: &mut FaasPlatform,
        directory: &ProcessDirectory,
        tick: u64,
    ) -> usize {
        let tip = node.tip_height();
        let deliver_upto = (tip + 1).saturating_sub(self.min_confirmations);
        let mut filter = EventFilter::default();
        filter.kind = Some(EventKind::Integration);
        filter.name = Some(BUS_MESSAGE_EVENT.into());
        filter
            .payload_eq
            .insert("platform".into(), Value::str(&self.platform_id));

        let mut delivered_now = 0;
        let mut h = self.cursor + 1;
        while h <= deliver_upto {
            let block = node.block_at(h).expect("height within tip");
            for event in block.events.iter().filter(|e| filter.matches(e)) {
                if self.delivered.contains_key(&event.event_id) {
                    continue;
                }
                self.delivered.insert(event.event_id.clone(), h);
                if self.deliver(event, h, platform, directory, tick) {
                    delivered_now += 1;
                }
            }
            h += 1;
        }

        let stable = tip.saturating_sub(self.stable_depth);
        self.cursor = self.cursor.max(stable.min(deliver_upto));
        let cursor = self.cursor;
        self.delivered.retain(|_, height| *height > cursor);
        delivered_now
    }

    fn deliver(
        &mut self,
        event: &crate::events::ChainEvent,
        height: u64,
        platform: &mut FaasPlatform,
        directory: &ProcessDirectory,
        tick: u64,
    ) -> bool {
        let dead = |reason: String, dead_letters: &mut Vec<DeadLetter>| {
            dead_letters.push(DeadLetter {
                message_id: event.event_id.clone(),
                reason,
                tick,
            });
            false
        };
        let Some(Value::Str(function)) = event.payload.get("function") else {
            return dead("missing function field".into(), &mut self.dead_letters);
        };
        let Some(Value::Str(encoded)) = event.payload.get("payload") else {
            return dead("missing payload field".into(), &mut self.dead_letters);
        };
        let parsed: Payload = match serde_json::from_str(encoded) {
            Ok(p) => p,
            Err(e) => {
                return dead(format!("malformed payload: {e}"), &mut self.dead_letters);
            }
        };
        if !platform.has_function(function) {
            return dead(
                format!("unknown function {function}"),
                &mut self.dead_letters,
            );
        }
        let sender = match event.payload.get("sender") {
            Some(Value::Str(s)) => s.clone(),
            _ => String::new(),
        };
        let source_platform = directory.platform_of(&sender).unwrap_or("").to_string();
        let mut delivery = parsed;
        delivery.insert("_sender".into(), Value::Str(sender));
        delivery.insert(
            "_source_platform".into(),
            Value::str(source_platform.clone()),
        );
        delivery.insert("_message_id".into(), Value::Str(event.event_id.0.clone()));
        platform.invoke_async(function, delivery);
        self.deliveries.push(BusDeliveryRecord {
            tick,
            message_id: event.event_id.clone(),
            height,
            function: function.clone(),
            source_platform,
        });
        true
    }
}
