//! Access layer between off-chain components and a chain node.
//!
//! Three responsibilities live here:
//!
//! * **Invocation** — signing and submitting contract calls, either
//!   fire-and-forget (the caller returns before the transaction can be
//!   included) or await-durability (the call is tracked until it has `K`
//!   confirmations, or is dropped).
//! * **Subscriptions** — pull-based event delivery. The gateway polls the
//!   chain's event log; nothing on the chain side ever pushes. Cursors only
//!   advance past the fork-stable region, so the reorgable window is
//!   re-scanned every poll and a per-event dedupe map turns at-least-once
//!   scanning into exactly-once delivery per event id.
//! * **Oracle** — watches for `external_call_requested` events, runs the
//!   requested endpoint (procedure, webhook, hosted function, nested chain
//!   call, or event watch) and reports the result back on chain as a
//!   three-argument callback `(correlation, status, result)`. Exactly one
//!   callback is produced per request event.

use crate::canonical::{canonical_string, Digest};
use crate::events::{ChainEvent, EventFilter, EventId, EventKind};
use crate::faas::FaasPlatform;
use crate::identity::Address;
use crate::ledger::{ChainConfig, Node, SubmitError, TxId};
use crate::value::{Payload, Value};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// Maximum canonical byte length for published payloads and stored
/// orchestration variables.
pub const MAX_PAYLOAD_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvocationMode {
    /// Return as soon as the transaction is accepted into the mempool.
    FireAndForget,
    /// Track the transaction until it reaches `k` confirmations.
    AwaitDurability { k: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxPhase {
    Pending,
    Included { height: u64 },
    Durable { height: u64 },
    Dropped { reason: String },
}

impl TxPhase {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TxPhase::Durable { .. } | TxPhase::Dropped { .. })
    }

    fn label(&self) -> String {
        match self {
            TxPhase::Pending => "pending".into(),
            TxPhase::Included { height } => format!("included:{height}"),
            TxPhase::Durable { height } => format!("durable:{height}"),
            TxPhase::Dropped { reason } => format!("dropped:{reason}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackedCall {
    pub tx_id: TxId,
    pub mode: InvocationMode,
    pub phase: TxPhase,
    pub submitted_tick: u64,
    /// Last tick the transaction was observed in the mempool or on chain.
    pub last_seen_tick: u64,
    /// `(tick, phase)` transitions, oldest first.
    pub history: Vec<(u64, String)>,
}

/// Evidence that a tracked call was pronounced durable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurableVerdict {
    pub tx_id: TxId,
    pub tick: u64,
    pub height: u64,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum DeliveryTarget {
    /// Deliver by enqueueing an invocation on a hosted function.
    Function { platform: String, function: String },
    /// Deliver into the gateway's internal queue for local consumers.
    Queue,
}

#[derive(Debug, Clone)]
pub struct Subscription {
    pub id: u64,
    pub filter: EventFilter,
    pub target: DeliveryTarget,
    pub min_confirmations: u64,
    cursor: u64,
    /// Delivered event ids, keyed to the height seen, pruned once final.
    delivered: BTreeMap<EventId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub subscription: u64,
    pub target: DeliveryTarget,
    pub event: ChainEvent,
    /// Event payload plus `_event_id`, `_event_name`, `_height` metadata.
    pub payload: Payload,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub tick: u64,
    pub subscription: u64,
    pub event_id: EventId,
    pub height: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PublishError {
    #[error("payload is {size} canonical bytes; the bus accepts at most {MAX_PAYLOAD_BYTES}")]
    PayloadTooLarge { size: usize },
    #[error(transparent)]
    Submit(#[from] SubmitError),
}

// ---------------------------------------------------------------------
// Oracle

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleEndpoint {
    /// Pure local procedure from the built-in catalog.
    Procedure { proc: String },
    /// Simulated HTTP call; behaves like the wrapped procedure and records
    /// the request line.
    Webhook {
        url: String,
        method: String,
        proc: String,
    },
    /// Invocation of a hosted function.
    Faas { platform: String, function: String },
    /// Nested chain call, awaited to `durability_k` confirmations.
    ChainCall { durability_k: u64 },
    /// Wait for a matching chain event, then call back with it.
    EventWatch { durability_k: u64 },
    /// Immediate empty acknowledgement.
    Nudge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskState {
    Captured,
    Invoked { detail: String },
    CalledBack { tx_id: TxId, status: String },
    Failed { reason: String },
}

#[derive(Debug, Clone)]
pub struct OracleTask {
    pub request_event_id: EventId,
    pub corr: String,
    pub endpoint_id: String,
    pub callback: String,
    pub requester: Address,
    pub args: BTreeMap<String, Value>,
    pub state: TaskState,
    pub captured_tick: u64,
}

#[derive(Debug, Default)]
struct OracleState {
    account: Option<Address>,
    endpoints: BTreeMap<String, OracleEndpoint>,
    tasks: Vec<OracleTask>,
    seen_requests: BTreeMap<EventId, u64>,
    cursor: u64,
}

/// Protocol keys a contract puts in an `external_call_requested` payload.
pub use crate::contract_vm::{
    ORACLE_ARG_PREFIX, ORACLE_KEY_CALLBACK, ORACLE_KEY_CORR, ORACLE_KEY_ENDPOINT,
};

// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Fork-stable depth; cursors never advance into the last `stable_depth`
    /// blocks. Should equal the chain's `max_reorg_depth`.
    pub stable_depth: u64,
    /// Ticks a tracked transaction may be absent from mempool and chain
    /// before it is pronounced dropped.
    pub drop_timeout: u64,
    /// Default `K` for await-durability calls and oracle chain calls.
    pub default_durability: u64,
    /// Fee ceiling for oracle callback transactions.
    pub oracle_max_fee: u64,
}

impl GatewayConfig {
    pub fn for_chain(chain: &ChainConfig) -> GatewayConfig {
        GatewayConfig {
            stable_depth: chain.max_reorg_depth,
            drop_timeout: 4 * chain.max_reorg_depth.max(1),
            default_durability: chain.max_reorg_depth + 1,
            oracle_max_fee: 10_000,
        }
    }
}

#[derive(Debug)]
pub struct Gateway {
    pub config: GatewayConfig,
    tracked: BTreeMap<TxId, TrackedCall>,
    durable_log: Vec<DurableVerdict>,
    subscriptions: BTreeMap<u64, Subscription>,
    next_subscription: u64,
    delivery_log: Vec<DeliveryRecord>,
    queue_out: VecDeque<Delivery>,
    oracle: OracleState,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Gateway {
        Gateway {
            config,
            tracked: BTreeMap::new(),
            durable_log: Vec::new(),
            subscriptions: BTreeMap::new(),
            next_subscription: 0,
            delivery_log: Vec::new(),
            queue_out: VecDeque::new(),
            oracle: OracleState::default(),
        }
    }

    pub fn for_chain(chain: &ChainConfig) -> Gateway {
        Gateway::new(GatewayConfig::for_chain(chain))
    }

    // ------------------------------------------------------------------
    // Invocation

    /// Signs, submits, and tracks a contract call. Fire-and-forget calls
    /// return here while the transaction is still waiting in the mempool —
    /// strictly before any block can contain it.
    pub fn invoke(
        &mut self,
        node: &mut Node,
        sender: &Address,
        contract: &Address,
        function: &str,
        args: Vec<Value>,
        max_fee: u64,
        mode: InvocationMode,
    ) -> Result<TxId, SubmitError> {
        let tx = node
            .build_transaction(sender, contract, function, args, max_fee)
            .map_err(|_| SubmitError::InvalidSignature)?;
        let tx_id = node.submit_transaction(tx)?;
        self.track(tx_id.clone(), mode, node.clock());
        Ok(tx_id)
    }

    /// Starts tracking a transaction that was submitted elsewhere.
    pub fn track(&mut self, tx_id: TxId, mode: InvocationMode, tick: u64) {
        self.tracked.insert(
            tx_id.clone(),
            TrackedCall {
                tx_id,
                mode,
                phase: TxPhase::Pending,
                submitted_tick: tick,
                last_seen_tick: tick,
                history: vec![(tick, TxPhase::Pending.label())],
            },
        );
    }

    pub fn call_phase(&self, tx_id: &TxId) -> Option<&TxPhase> {
        self.tracked.get(tx_id).map(|c| &c.phase)
    }

    pub fn tracked_call(&self, tx_id: &TxId) -> Option<&TrackedCall> {
        self.tracked.get(tx_id)
    }

    pub fn durable_log(&self) -> &[DurableVerdict] {
        &self.durable_log
    }

    /// Reconciles every non-terminal tracked call against the chain.
    ///
    /// * seen in the mempool — still pending;
    /// * seen on chain — included; durable once confirmations reach `k`;
    /// * seen nowhere for `drop_timeout` ticks — dropped.
    ///
    /// `Included` is sticky across forks: a call whose block was orphaned
    /// stays `Included` (its height may change on re-inclusion) unless the
    /// transaction stays gone long enough to be pronounced dropped.
    pub fn monitor_durability(&mut self, node: &Node) {
        let tick = node.clock();
        let tip = node.tip_height();
        let durable_log = &mut self.durable_log;
        let drop_timeout = self.config.drop_timeout;
        for call in self.tracked.values_mut() {
            if call.phase.is_terminal() {
                continue;
            }
            match node.get_confirmations(&call.tx_id) {
                Some(0) => {
                    call.last_seen_tick = tick;
                }
                Some(confirmations) => {
                    call.last_seen_tick = tick;
                    let height = tip - confirmations + 1;
                    let durable_at = match call.mode {
                        InvocationMode::AwaitDurability { k } => k,
                        InvocationMode::FireAndForget => u64::MAX,
                    };
                    let next = if confirmations >= durable_at {
                        TxPhase::Durable { height }
                    } else {
                        TxPhase::Included { height }
                    };
                    if call.phase != next {
                        call.history.push((tick, next.label()));
                        call.phase = next.clone();
                    }
                    if let TxPhase::Durable { height } = next {
                        durable_log.push(DurableVerdict {
                            tx_id: call.tx_id.clone(),
                            tick,
                            height,
                            k: durable_at,
                        });
                    }
                }
                None => {
                    if tick.saturating_sub(call.last_seen_tick) >= drop_timeout {
                        let next = TxPhase::Dropped {
                            reason: format!(
                                "absent from mempool and chain for {} ticks",
                                tick - call.last_seen_tick
                            ),
                        };
                        call.history.push((tick, next.label()));
                        call.phase = next;
                    }
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Subscriptions

    /// Registers a subscription. Delivery starts after the current tip:
    /// history is available through [`Gateway::query_past_events`], not
    /// through subscriptions.
    pub fn subscribe(
        &mut self,
        node: &Node,
        filter: EventFilter,
        target: DeliveryTarget,
        min_confirmations: u64,
    ) -> u64 {
        let id = self.next_subscription;
        self.next_subscription += 1;
        self.subscriptions.insert(
            id,
            Subscription {
                id,
                filter,
                target,
                min_confirmations: min_confirmations.max(1),
                cursor: node.tip_height(),
                delivered: BTreeMap::new(),
            },
        );
        id
    }

    pub fn unsubscribe(&mut self, id: u64) {
        self.subscriptions.remove(&id);
    }

    pub fn subscription(&self, id: u64) -> Option<&Subscription> {
        self.subscriptions.get(&id)
    }

    pub fn subscription_count(&self) -> usize {
        self.subscriptions.len()
    }

    pub fn delivery_log(&self) -> &[DeliveryRecord] {
        &self.delivery_log
    }

    /// Pulls fresh, sufficiently-confirmed events for every subscription.
    ///
    /// The scan window reaches from just past the cursor up to the highest
    /// block with `min_confirmations`; the cursor then advances only as far
    /// as both the delivered boundary and the fork-stable boundary allow, so
    /// blocks that can still be orphaned are re-scanned on the next poll and
    /// duplicate delivery is suppressed per event id.
    pub fn poll_cycle(&mut self, node: &Node) -> Vec<Delivery> {
        let tick = node.clock();
        let tip = node.tip_height();
        let stable = tip.saturating_sub(self.config.stable_depth);
        let mut out = Vec::new();
        let delivery_log = &mut self.delivery_log;
        let queue_out = &mut self.queue_out;
        for sub in self.subscriptions.values_mut() {
            let deliver_upto = (tip + 1).saturating_sub(sub.min_confirmations);
            if deliver_upto > sub.cursor {
                for h in (sub.cursor + 1)..=deliver_upto {
                    let block = node.block_at(h).expect("height is at most tip");
                    for event in block.events.iter().filter(|e| sub.filter.matches(e)) {
                        if sub.delivered.contains_key(&event.event_id) {
                            continue;
                        }
                        sub.delivered.insert(event.event_id.clone(), h);
                        let mut payload = event.payload.clone();
                        payload.insert("_event_id".into(), Value::Str(event.event_id.to_string()));
                        payload.insert("_event_name".into(), Value::str(&event.name));
                        payload.insert("_height".into(), Value::Int(h as i64));
                        let delivery = Delivery {
                            subscription: sub.id,
                            target: sub.target.clone(),
                            event: event.clone(),
                            payload,
                            tick,
                        };
                        delivery_log.push(DeliveryRecord {
                            tick,
                            subscription: sub.id,
                            event_id: event.event_id.clone(),
                            height: h,
                        });
                        if sub.target == DeliveryTarget::Queue {
                            queue_out.push_back(delivery.clone());
                        }
                        out.push(delivery);
                    }
                }
            }
            let new_cursor = sub.cursor.max(stable.min(deliver_upto));
            sub.delivered.retain(|_, h| *h > new_cursor);
            sub.cursor = new_cursor;
        }
        out
    }

    /// Takes everything delivered to queue targets since the last drain.
    pub fn drain_queue(&mut self) -> Vec<Delivery> {
        self.queue_out.drain(..).collect()
    }

    /// Authenticated read of historic events, forwarded to the node.
    pub fn query_past_events(
        &self,
        node: &Node,
        from: u64,
        to: u64,
        filter: &EventFilter,
        credential: Option<&Address>,
    ) -> Result<Vec<ChainEvent>, crate::ledger::EventLogError> {
        node.read_event_log(from, to, filter, credential)
    }

    // ------------------------------------------------------------------
    // Bus publishing

    /// Publishes a payload through an on-chain bus contract. The payload is
    /// canonicalized to a string argument and size-checked before any
    /// transaction is built.
    pub fn publish(
        &mut self,
        node: &mut Node,
        sender: &Address,
        bus: &Address,
        target_platform: &str,
        target_function: &str,
        payload: &Payload,
        max_fee: u64,
    ) -> Result<TxId, PublishError> {
        let encoded = canonical_string(payload);
        if encoded.len() > MAX_PAYLOAD_BYTES {
            return Err(PublishError::PayloadTooLarge {
                size: encoded.len(),
            });
        }
        let tx_id = self.invoke(
            node,
            sender,
            bus,
            "publish",
            vec![
                Value::str(target_platform),
                Value::str(target_function),
                Value::Str(encoded),
            ],
            max_fee,
            InvocationMode::FireAndForget,
        )?;
        Ok(tx_id)
    }

    // ------------------------------------------------------------------
    // Oracle

    /// Sets the chain account the oracle signs callbacks with.
    pub fn configure_oracle(&mut self, account: Address) {
        self.oracle.account = Some(account);
    }

    pub fn register_endpoint(&mut self, id: &str, endpoint: OracleEndpoint) {
        self.oracle.endpoints.insert(id.to_string(), endpoint);
    }

    pub fn oracle_tasks(&self) -> &[OracleTask] {
        &self.oracle.tasks
    }

    fn resolve_endpoint(&self, id: &str) -> Option<OracleEndpoint> {
        if let Some(rest) = id.strip_prefix("faas:") {
            let (platform, function) = rest.split_once('/')?;
            return Some(OracleEndpoint::Faas {
                platform: platform.to_string(),
                function: function.to_string(),
            });
        }
        match id {
            "@chain" => Some(OracleEndpoint::ChainCall {
                durability_k: self.config.default_durability,
            }),
            "@event-wait" => Some(OracleEndpoint::EventWatch {
                durability_k: 1,
            }),
            "@choice" => Some(OracleEndpoint::Nudge),
            _ => self.oracle.endpoints.get(id).cloned(),
        }
    }

    /// One oracle round: first advance existing tasks (invoke endpoints,
    /// submit callbacks), then capture new request events. A request
    /// captured this round is therefore invoked on the next one.
    pub fn oracle_cycle(
        &mut self,
        node: &mut Node,
        platforms: &mut BTreeMap<String, FaasPlatform>,
    ) {
        let tick = node.clock();
        let mut tasks = std::mem::take(&mut self.oracle.tasks);
        for task in tasks.iter_mut() {
            match &task.state {
                TaskState::Captured => self.advance_captured(task, node, platforms),
                TaskState::Invoked { .. } => self.advance_invoked(task, node),
                _ => {}
            }
        }
        self.oracle.tasks = tasks;
        self.capture_requests(node, tick);
    }

    fn capture_requests(&mut self, node: &Node, tick: u64) {
        let tip = node.tip_height();
        let stable = tip.saturating_sub(self.config.stable_depth);
        if tip > self.oracle.cursor {
            for h in (self.oracle.cursor + 1)..=tip {
                let block = node.block_at(h).expect("height is at most tip");
                for event in &block.events {
                    if event.kind != EventKind::ExternalCallRequested {
                        continue;
                    }
                    if self.oracle.seen_requests.contains_key(&event.event_id) {
                        continue;
                    }
                    self.oracle.seen_requests.insert(event.event_id.clone(), h);
                    let endpoint_id = match event.payload.get(ORACLE_KEY_ENDPOINT) {
                        Some(Value::Str(s)) => s.clone(),
                        _ => continue, // not an oracle-shaped request
                    };
                    let callback = match event.payload.get(ORACLE_KEY_CALLBACK) {
                        Some(Value::Str(s)) => s.clone(),
                        _ => continue,
                    };
                    let corr = match event.payload.get(ORACLE_KEY_CORR) {
                        Some(v) => match v {
                            Value::Str(s) => s.clone(),
                            other => other.to_string(),
                        },
                        None => event.event_id.to_string(),
                    };
                    let args: BTreeMap<String, Value> = event
                        .payload
                        .iter()
                        .filter_map(|(k, v)| {
                            k.strip_prefix(ORACLE_ARG_PREFIX)
                                .map(|stripped| (stripped.to_string(), v.clone()))
                        })
                        .collect();
                    self.oracle.tasks.push(OracleTask {
                        request_event_id: event.event_id.clone(),
                        corr,
                        endpoint_id,
                        callback,
                        requester: Digest(event.emitter.clone()),
                        args,
                        state: TaskState::Captured,
                        captured_tick: tick,
                    });
                }
            }
        }
        let new_cursor = self.oracle.cursor.max(stable);
        self.oracle.seen_requests.retain(|_, h| *h > new_cursor);
        self.oracle.cursor = new_cursor;
    }

    fn advance_captured(
        &mut self,
        task: &mut OracleTask,
        node: &mut Node,
        platforms: &mut BTreeMap<String, FaasPlatform>,
    ) {
        let Some(endpoint) = self.resolve_endpoint(&task.endpoint_id) else {
            self.submit_callback(task, node, "error", Value::str("unknown endpoint"));
            return;
        };
        match endpoint {
            OracleEndpoint::Procedure { proc } => {
                let (status, result) = match procs::run(&proc, &task.args) {
                    Ok(v) => ("ok", v),
                    Err(e) => ("error", Value::Str(e)),
                };
                self.submit_callback(task, node, status, result);
            }
            OracleEndpoint::Webhook { url, method, proc } => {
                let (status, result) = match procs::run(&proc, &task.args) {
                    Ok(v) => ("ok", v),
                    Err(e) => ("error", Value::Str(e)),
                };
                task.state = TaskState::Invoked {
                    detail: format!("{method} {url}"),
                };
                self.submit_callback(task, node, status, result);
            }
            OracleEndpoint::Faas { platform, function } => {
                let Some(p) = platforms.get_mut(&platform) else {
                    self.submit_callback(task, node, "error", Value::str("unknown platform"));
                    return;
                };
                let payload: Payload = task.args.clone().into_iter().collect();
                let res = p.invoke_sync(&function, payload, node.clock());
                let (status, result) = match res.outcome {
                    Ok(out) => ("ok", scalarize_payload(&out)),
                    Err(e) => ("error", Value::Str(e.to_string())),
                };
                self.submit_callback(task, node, status, result);
            }
            OracleEndpoint::ChainCall { durability_k } => {
                self.start_chain_call(task, node, durability_k);
            }
            OracleEndpoint::EventWatch { durability_k } => {
                task.state = TaskState::Invoked {
                    detail: format!("watch:{}:{}", durability_k, node.tip_height()),
                };
            }
            OracleEndpoint::Nudge => {
                self.submit_callback(task, node, "ok", Value::str(""));
            }
        }
    }

    fn start_chain_call(&mut self, task: &mut OracleTask, node: &mut Node, k: u64) {
        let Some(oracle) = self.oracle.account.clone() else {
            task.state = TaskState::Failed {
                reason: "oracle account not configured".into(),
            };
            return;
        };
        let contract = match task.args.get("contract") {
            Some(Value::Str(s)) => match node.resolve_name(s) {
                Some(addr) => addr,
                None => Digest(s.clone()),
            },
            _ => {
                self.submit_callback(task, node, "error", Value::str("missing contract argument"));
                return;
            }
        };
        let function = match task.args.get("function") {
            Some(Value::Str(s)) => s.clone(),
            _ => {
                self.submit_callback(task, node, "error", Value::str("missing function argument"));
                return;
            }
        };
        let call_args: Vec<Value> = match task.args.get("args") {
            Some(Value::Str(encoded)) => match serde_json::from_str(encoded) {
                Ok(v) => v,
                Err(e) => {
                    self.submit_callback(
                        task,
                        node,
                        "error",
                        Value::Str(format!("bad args encoding: {e}")),
                    );
                    return;
                }
            },
            _ => Vec::new(),
        };
        // The request may carry its own durability requirement.
        let k = match task.args.get("k") {
            Some(Value::Int(n)) if *n >= 1 => *n as u64,
            _ => k,
        };
        let max_fee = self.config.oracle_max_fee;
        match self.invoke(
            node,
            &oracle,
            &contract,
            &function,
            call_args,
            max_fee,
            InvocationMode::AwaitDurability { k },
        ) {
            Ok(inner) => {
                task.state = TaskState::Invoked {
                    detail: format!("chain:{inner}"),
                };
            }
            Err(e) => {
                self.submit_callback(task, node, "error", Value::Str(e.to_string()));
            }
        }
    }

    fn advance_invoked(&mut self, task: &mut OracleTask, node: &mut Node) {
        let detail = match &task.state {
            TaskState::Invoked { detail } => detail.clone(),
            _ => return,
        };
        if let Some(inner) = detail.strip_prefix("chain:") {
            let inner_id = Digest(inner.to_string());
            match self.call_phase(&inner_id).cloned() {
                Some(TxPhase::Durable { .. }) => {
                    let result = node
                        .receipt(&inner_id)
                        .map(|r| match &r.record.outcome {
                            crate::contract_vm::ExecOutcome::Returned(Some(v)) => v.clone(),
                            _ => Value::str(""),
                        })
                        .unwrap_or_else(|| Value::str(""));
                    let status = match node.receipt(&inner_id) {
                        Some(r) if r.record.outcome.is_success() => "ok",
                        _ => "error",
                    };
                    self.submit_callback(task, node, status, result);
                }
                Some(TxPhase::Dropped { reason }) => {
                    self.submit_callback(task, node, "error", Value::Str(reason));
                }
                _ => {}
            }
        } else if let Some(rest) = detail.strip_prefix("watch:") {
            let (k_str, from_str) = rest.split_once(':').unwrap_or(("1", "0"));
            let k: u64 = k_str.parse().unwrap_or(1);
            let from: u64 = from_str.parse().unwrap_or(0);
            let tip = node.tip_height();
            let upto = (tip + 1).saturating_sub(k.max(1));
            if upto <= from {
                return;
            }
            let name = match task.args.get("name") {
                Some(Value::Str(s)) => s.clone(),
                _ => {
                    self.submit_callback(task, node, "error", Value::str("missing name argument"));
                    return;
                }
            };
            for h in (from + 1)..=upto {
                let block = node.block_at(h).expect("height is at most tip");
                if let Some(event) = block.events.iter().find(|e| {
                    e.name == name && e.event_id != task.request_event_id
                        && e.kind != EventKind::ExternalCallRequested
                }) {
                    let summary = event_summary(&event.name, &event.payload);
                    self.submit_callback(task, node, "ok", Value::Str(summary));
                    return;
                }
            }
        }
    }

    /// Builds and submits the single callback transaction for a task.
    fn submit_callback(&mut self, task: &mut OracleTask, node: &mut Node, status: &str, result: Value) {
        let Some(oracle) = self.oracle.account.clone() else {
            task.state = TaskState::Failed {
                reason: "oracle account not configured".into(),
            };
            return;
        };
        let args = vec![Value::str(&task.corr), Value::str(status), result];
        let max_fee = self.config.oracle_max_fee;
        match self.invoke(
            node,
            &oracle,
            &task.requester.clone(),
            &task.callback.clone(),
            args,
            max_fee,
            InvocationMode::FireAndForget,
        ) {
            Ok(tx_id) => {
                task.state = TaskState::CalledBack {
                    tx_id,
                    status: status.to_string(),
                };
            }
            Err(e) => {
                task.state = TaskState::Failed {
                    reason: e.to_string(),
                };
            }
        }
    }
}

/// Collapses a result payload to a single storable value: the `value`
/// field when present, otherwise the canonical encoding of the whole map.
pub fn scalarize_payload(payload: &Payload) -> Value {
    match payload.get("value") {
        Some(v) => v.clone(),
        None => Value::Str(canonical_string(payload)),
    }
}

/// Canonical one-string summary of an event: its name and payload, with no
/// chain coordinates, so re-included events summarize identically.
pub fn event_summary(name: &str, payload: &Payload) -> String {
    canonical_string(&serde_json::json!({
        "name": name,
        "payload": payload,
    }))
}

/// Pure procedures oracle endpoints can name.
pub mod procs {
    use super::*;

    pub fn run(proc: &str, args: &BTreeMap<String, Value>) -> Result<Value, String> {
        match proc {
            "identity" => Ok(args.get("value").cloned().unwrap_or_else(|| Value::str(""))),
            "upper" => match args.get("value") {
                Some(Value::Str(s)) => Ok(Value::Str(s.to_uppercase())),
                _ => Err("upper requires a string value".into()),
            },
            "sum" => match (args.get("a"), args.get("b")) {
                (Some(Value::Int(a)), Some(Value::Int(b))) => a
                    .checked_add(*b)
                    .map(Value::Int)
                    .ok_or_else(|| "sum overflow".into()),
                _ => Err("sum requires integer arguments a and b".into()),
            },
            "fail" => Err("procedure failed".into()),
            other => Err(format!("unknown procedure {other}")),
        }
    }

    pub fn known_ids() -> &'static [&'static str] {
        &["identity", "upper", "sum", "fail"]
    }
}
