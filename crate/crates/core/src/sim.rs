//! One-struct composition of the whole testbed.
//!
//! A [`Simulation`] owns a chain node, the gateway, any number of function
//! platforms, bus routers, and optionally an off-chain workflow engine, and
//! advances them in a fixed phase order per tick:
//!
//! 1. the chain produces a block (possibly after a fork),
//! 2. platforms fire timers and drain queued invocations; chain effects
//!    requested by handlers are submitted as transactions,
//! 3. the gateway refreshes durability phases of tracked calls,
//! 4. the gateway polls subscriptions and routes deliveries,
//! 5. the call relay advances pending external-call tasks,
//! 6. bus routers scan for newly confirmed messages,
//! 7. the workflow engine takes a step on running instances.
//!
//! Anything scripted on top (scenario actions) runs after the tick, so a
//! transaction submitted "at tick t" is included no earlier than t+1.
//! Everything observable is appended to a [`TraceLog`]; identical inputs
//! yield byte-identical traces.

use crate::faas::{ChainEffect, FaasPlatform, InvokeResult};
use crate::gateway::{DeliveryTarget, Gateway, InvocationMode};
use crate::ledger::{ChainConfig, Node, TickOutcome};
use crate::message_bus::{MessageRouter, ProcessDirectory};
use crate::orchestration::engine::{InstanceStatus, OffChainEngine};
use crate::trace::TraceLog;
use serde_json::json;
use std::collections::BTreeMap;

pub struct Simulation {
    pub node: Node,
    pub gateway: Gateway,
    pub platforms: BTreeMap<String, FaasPlatform>,
    pub routers: Vec<MessageRouter>,
    pub directory: ProcessDirectory,
    pub engine: Option<OffChainEngine>,
    pub trace: TraceLog,
    durable_seen: usize,
}

impl Simulation {
    pub fn new(config: ChainConfig) -> Simulation {
        let node = Node::new(config.clone());
        let gateway = Gateway::for_chain(&config);
        Simulation {
            node,
            gateway,
            platforms: BTreeMap::new(),
            routers: Vec::new(),
            directory: ProcessDirectory::default(),
            engine: None,
            trace: TraceLog::new(),
            durable_seen: 0,
        }
    }

    pub fn add_platform(&mut self, platform: FaasPlatform) {
        self.platforms
            .insert(platform.platform_id.clone(), platform);
    }

    pub fn platform_mut(&mut self, id: &str) -> Option<&mut FaasPlatform> {
        self.platforms.get_mut(id)
    }

    pub fn clock(&self) -> u64 {
        self.node.clock()
    }

    /// Units billed across all platforms (idle functions bill nothing).
    pub fn total_billed_units(&self) -> u64 {
        self.platforms
            .values()
            .flat_map(|p| p.billing_report())
            .map(|r| r.billed_units)
            .sum()
    }

    /// Transaction fees charged across all accounts on the current chain.
    pub fn total_fees_charged(&self) -> u64 {
        self.node
            .registry
            .addresses()
            .map(|a| self.node.charged_of(a))
            .sum()
    }

    /// Advances every component by one tick and returns the new clock.
    pub fn tick(&mut self) -> u64 {
        // Phase 1: consensus.
        let outcome = self.node.consensus_tick();
        let tick = self.node.clock();
        if let TickOutcome::Reorg { notice, .. } = &outcome {
            self.trace.record(
                tick,
                "reorg",
                "chain",
                json!({
                    "depth": notice.depth,
                    "orphaned_heights": notice.orphaned_heights,
                    "orphaned_transactions": notice.orphaned_txs.len(),
                }),
            );
        }
        let produced = outcome.produced();
        self.trace.record(
            tick,
            "block",
            "chain",
            json!({
                "height": produced.height,
                "hash": produced.block_hash.as_str(),
                "tx_count": produced.executed.len(),
                "dropped": produced
                    .dropped
                    .iter()
                    .map(|(tx, reason)| json!({"tx": tx.as_str(), "reason": reason}))
                    .collect::<Vec<_>>(),
            }),
        );
        if let Some(block) = self.node.block_at(produced.height) {
            for event in &block.events {
                self.trace.record(
                    tick,
                    "event",
                    "chain",
                    json!({
                        "event_id": event.event_id.as_str(),
                        "event_kind": event.kind,
                        "name": event.name,
                        "emitter": event.emitter,
                        "height": event.block_height,
                    }),
                );
            }
        }

        // Phase 2: platforms run; handlers may request chain effects.
        let mut effects: Vec<ChainEffect> = Vec::new();
        for (id, platform) in self.platforms.iter_mut() {
            let mut finished: Vec<(String, InvokeResult)> = platform.fire_timers(tick);
            finished.extend(platform.drain_queue(tick));
            for (function, result) in finished {
                let outcome = match &result.outcome {
                    Ok(_) => "ok".to_string(),
                    Err(e) => e.to_string(),
                };
                self.trace.record(
                    tick,
                    "invocation",
                    format!("faas:{id}"),
                    json!({"function": function, "outcome": outcome}),
                );
                effects.extend(result.effects);
            }
        }
        for effect in effects {
            let ChainEffect::Invoke {
                sender,
                contract,
                function,
                args,
                max_fee,
            } = effect;
            let submitted = self.gateway.invoke(
                &mut self.node,
                &sender,
                &contract,
                &function,
                args,
                max_fee,
                InvocationMode::FireAndForget,
            );
            let detail = match submitted {
                Ok(tx) => json!({"function": function, "tx": tx.as_str()}),
                Err(e) => json!({"function": function, "error": e.to_string()}),
            };
            self.trace.record(tick, "chain_effect", "sim", detail);
        }

        // Phase 3: durability monitoring.
        self.gateway.monitor_durability(&self.node);
        for verdict in &self.gateway.durable_log()[self.durable_seen..] {
            self.trace.record(
                tick,
                "durable",
                "gateway",
                json!({
                    "tx": verdict.tx_id.as_str(),
                    "height": verdict.height,
                    "k": verdict.k,
                }),
            );
        }
        self.durable_seen = self.gateway.durable_log().len();

        // Phase 4: subscription polling; function targets enqueue async.
        // The poll record precedes its deliveries so traces show that
        // consumers pull events — nothing is pushed out of the chain.
        if self.gateway.subscription_count() > 0 {
            self.trace.record(
                tick,
                "poll",
                "gateway",
                json!({"subscriptions": self.gateway.subscription_count()}),
            );
        }
        let deliveries = self.gateway.poll_cycle(&self.node);
        for delivery in &deliveries {
            let target = match &delivery.target {
                DeliveryTarget::Function { platform, function } => {
                    if let Some(p) = self.platforms.get_mut(platform) {
                        p.invoke_async(function, delivery.payload.clone());
                    }
                    format!("faas:{platform}/{function}")
                }
                DeliveryTarget::Queue => "queue".to_string(),
            };
            self.trace.record(
                tick,
                "delivery",
                "gateway",
                json!({
                    "subscription": delivery.subscription,
                    "event_id": delivery.event.event_id.as_str(),
                    "event_name": delivery.event.name,
                    "target": target,
                }),
            );
        }

        // Phase 5: external-call relay.
        self.gateway.oracle_cycle(&mut self.node, &mut self.platforms);

        // Phase 6: bus routers.
        for router in &mut self.routers {
            let Some(platform) = self.platforms.get_mut(&router.platform_id) else {
                continue;
            };
            let deliveries_before = router.delivery_log().len();
            let dead_before = router.dead_letters().len();
            router.route_cycle(&self.node, platform, &self.directory, tick);
            let module = format!("router:{}", router.platform_id);
            for record in &router.delivery_log()[deliveries_before..] {
                self.trace.record(
                    tick,
                    "bus_delivery",
                    module.clone(),
                    json!({
                        "message_id": record.message_id.as_str(),
                        "function": record.function,
                        "height": record.height,
                        "source_platform": record.source_platform,
                    }),
                );
            }
            for dead in &router.dead_letters()[dead_before..] {
                self.trace.record(
                    tick,
                    "dead_letter",
                    module.clone(),
                    json!({
                        "message_id": dead.message_id.as_str(),
                        "reason": dead.reason,
                    }),
                );
            }
        }

        // Phase 7: workflow engine.
        if let Some(engine) = self.engine.as_mut() {
            let before: BTreeMap<String, InstanceStatus> = engine
                .instances
                .iter()
                .map(|(id, inst)| (id.clone(), inst.status.clone()))
                .collect();
            engine.pump(
                &mut self.node,
                &mut self.gateway,
                &mut self.platforms,
                &deliveries,
            );
            for (id, inst) in &engine.instances {
                if before.get(id) != Some(&inst.status) {
                    self.trace.record(
                        tick,
                        "instance",
                        "engine",
                        json!({
                            "instance": id,
                            "status": serde_json::to_value(&inst.status).unwrap(),
                        }),
                    );
                }
            }
        }

        tick
    }

    /// Runs `n` ticks.
    pub fn run_ticks(&mut self, n: u64) {
        for _ in 0..n {
            self.tick();
        }
    }
}
