//! Function-as-a-service platforms with stateless handlers.
//!
//! A platform hosts named functions. Every invocation gets a fresh
//! [`HandlerCtx`]: locals never survive between calls, elapsed time is
//! simulated through `sleep`, and a budget overrun aborts the handler with a
//! timeout that is still billed. Billing is strictly per invocation — a
//! registered function that is never called costs nothing.
//!
//! Handlers cannot touch the chain directly. When one wants a ledger write
//! it records a [`ChainEffect`]; the surrounding runtime drains those and
//! relays them, which keeps handler execution pure and replayable.

use crate::identity::Address;
use crate::value::{Payload, Value};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type Handler = Arc<dyn Fn(&Payload, &mut HandlerCtx) -> Result<Payload, String> + Send + Sync>;

/// Ledger write requested by a handler, performed later by the runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainEffect {
    Invoke {
        sender: Address,
        contract: Address,
        function: String,
        args: Vec<Value>,
        max_fee: u64,
    },
}

/// Per-invocation execution context. Dropped when the handler returns, so
/// nothing a handler stores here outlives the call.
pub struct HandlerCtx {
    pub locals: BTreeMap<String, Value>,
    pub effects: Vec<ChainEffect>,
    consumed: u64,
    max_duration: u64,
}

impl HandlerCtx {
    fn new(max_duration: u64) -> HandlerCtx {
        HandlerCtx {
            locals: BTreeMap::new(),
            effects: Vec::new(),
            consumed: 0,
            max_duration,
        }
    }

    /// Simulates `duration` units of work. Exceeding the function's budget
    /// aborts the invocation as a timeout.
    pub fn sleep(&mut self, duration: u64) -> Result<(), String> {
        self.consumed = self.consumed.saturating_add(duration);
        if self.consumed > self.max_duration {
            Err(format!(
                "execution budget exceeded: {} > {}",
                self.consumed, self.max_duration
            ))
        } else {
            Ok(())
        }
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvokeError {
    #[error("no function registered under this name")]
    UnknownFunction,
    #[error("handler failed: {0}")]
    Handler(String),
    #[error("execution exceeded the duration budget")]
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvocationOutcome {
    Ok,
    Error,
    Timeout,
}

impl fmt::Display for InvocationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvocationOutcome::Ok => write!(f, "ok"),
            InvocationOutcome::Error => write!(f, "error"),
            InvocationOutcome::Timeout => write!(f, "timeout"),
        }
    }
}

/// One line of the platform's execution history.
#[derive(Debug, Clone, PartialEq)]
pub struct InvocationRecord {
    pub tick: u64,
    pub function: String,
    pub payload: Payload,
    pub outcome: InvocationOutcome,
    /// Work units billed: simulated duration, at least one per invocation.
    pub billed_units: u64,
    pub result: Option<Payload>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BillingRecord {
    pub platform: String,
    pub function: String,
    pub invocations: u64,
    pub billed_units: u64,
}

pub struct InvokeResult {
    pub outcome: Result<Payload, InvokeError>,
    pub effects: Vec<ChainEffect>,
}

struct FunctionEntry {
    handler: Handler,
    max_duration: u64,
    timer_period: Option<u64>,
}

struct QueuedInvocation {
    function: String,
    payload: Payload,
}

/// A single FaaS platform: registered functions, an asynchronous invocation
/// queue, timers, and the invocation history used for billing.
pub struct FaasPlatform {
    pub platform_id: String,
    /// Whether the platform can receive calls straight from chain-side
    /// components without an adapter in between.
    pub native_integration: bool,
    functions: BTreeMap<String, FunctionEntry>,
    queue: VecDeque<QueuedInvocation>,
    log: Vec<InvocationRecord>,
}

pub const DEFAULT_MAX_DURATION: u64 = 10;

impl FaasPlatform {
    pub fn new(platform_id: &str) -> FaasPlatform {
        FaasPlatform {
            platform_id: platform_id.to_string(),
            native_integration: true,
            functions: BTreeMap::new(),
            queue: VecDeque::new(),
            log: Vec::new(),
        }
    }

    pub fn register_function(
        &mut self,
        name: &str,
        handler: Handler,
        max_duration: u64,
        timer_period: Option<u64>,
    ) {
        assert!(max_duration >= 1, "a function needs a positive duration budget");
        self.functions.insert(
            name.to_string(),
            FunctionEntry {
                handler,
                max_duration,
                timer_period,
            },
        );
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    pub fn function_names(&self) -> Vec<String> {
        self.functions.keys().cloned().collect()
    }

    pub fn cancel_timer(&mut self, name: &str) {
        if let Some(entry) = self.functions.get_mut(name) {
            entry.timer_period = None;
        }
    }

    /// Runs the handler now and records the invocation.
    pub fn invoke_sync(&mut self, name: &str, payload: Payload, tick: u64) -> InvokeResult {
        let Some(entry) = self.functions.get(name) else {
            return InvokeResult {
                outcome: Err(InvokeError::UnknownFunction),
                effects: Vec::new(),
            };
        };
        let handler = Arc::clone(&entry.handler);
        let max_duration = entry.max_duration;
        let mut ctx = HandlerCtx::new(max_duration);
        let raw = handler(&payload, &mut ctx);
        let timed_out = ctx.consumed > max_duration;
        let billed_units = ctx.consumed.clamp(1, max_duration);
        let (outcome, kind, result) = match raw {
            _ if timed_out => (Err(InvokeError::Timeout), InvocationOutcome::Timeout, None),
            Ok(out) => (Ok(out.clone()), InvocationOutcome::Ok, Some(out)),
            Err(msg) => (Err(InvokeError::Handler(msg)), InvocationOutcome::Error, None),
        };
        self.log.push(InvocationRecord {
            tick,
            function: name.to_string(),
            payload,
            outcome: kind,
            billed_units,
            result,
        });
        InvokeResult {
            outcome,
            effects: ctx.effects,
        }
    }

    /// Defers an invocation to the next queue drain.
    pub fn invoke_async(&mut self, name: &str, payload: Payload) {
        self.queue.push_back(QueuedInvocation {
            function: name.to_string(),
            payload,
        });
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Executes everything queued so far, in arrival order. Invocations a
    /// handler enqueues while draining run on the next drain, not this one.
    pub fn drain_queue(&mut self, tick: u64) -> Vec<(String, InvokeResult)> {
        let batch: Vec<QueuedInvocation> = self.queue.drain(..).collect();
        batch
            .into_iter()
            .map(|q| {
                let res = self.invoke_sync(&q.function, q.payload, tick);
                (q.function, res)
            })
            .collect()
    }

    /// Fires every timer whose period divides `tick`. A timer invocation
    /// carries the tick in its payload.
    pub fn fire_timers(&mut self, tick: u64) -> Vec<(String, InvokeResult)> {
        if tick == 0 {
            return Vec::new();
        }
        let due: Vec<String> = self
            .functions
            .iter()
            .filter(|(_, e)| matches!(e.timer_period, Some(p) if p > 0 && tick % p == 0))
            .map(|(name, _)| name.clone())
            .collect();
        due.into_iter()
            .map(|name| {
                let payload: Payload =
                    [("timer_tick".to_string(), Value::Int(tick as i64))].into_iter().collect();
                let res = self.invoke_sync(&name, payload, tick);
                (name, res)
            })
            .collect()
    }

    pub fn invocation_log(&self) -> &[InvocationRecord] {
        &self.log
    }

    /// One record per registered function, idle functions included at zero.
    pub fn billing_report(&self) -> Vec<BillingRecord> {
        let mut per_fn: BTreeMap<&str, (u64, u64)> = self
            .functions
            .keys()
            .map(|k| (k.as_str(), (0, 0)))
            .collect();
        for rec in &self.log {
            let slot = per_fn.entry(rec.function.as_str()).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += rec.billed_units;
        }
        per_fn
            .into_iter()
            .map(|(function, (invocations, billed_units))| BillingRecord {
                platform: self.platform_id.clone(),
                function: function.to_string(),
                invocations,
                billed_units,
            })
            .collect()
    }
}

impl fmt::Debug for FaasPlatform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FaasPlatform")
            .field("platform_id", &self.platform_id)
            .field("functions", &self.functions.keys().collect::<Vec<_>>())
            .field("queued", &self.queue.len())
            .field("log_len", &self.log.len())
            .finish()
    }
}

/// Built-in handlers that scenario configurations can reference by id.
pub mod catalog {
    use super::*;

    /// Returns the handler registered under `id`, if the catalog knows it.
    pub fn handler(id: &str) -> Option<Handler> {
        match id {
            "echo" => Some(Arc::new(|payload: &Payload, _ctx: &mut HandlerCtx| {
                Ok(payload.clone())
            })),
            "sleep_then_echo" => Some(Arc::new(|payload: &Payload, ctx: &mut HandlerCtx| {
                let duration = match payload.get("sleep") {
                    Some(Value::Int(n)) if *n > 0 => *n as u64,
                    _ => 1,
                };
                ctx.sleep(duration)?;
                Ok(payload.clone())
            })),
            "local_count" => Some(Arc::new(|_payload: &Payload, ctx: &mut HandlerCtx| {
                let next = match ctx.locals.get("n") {
                    Some(Value::Int(n)) => n + 1,
                    _ => 1,
                };
                ctx.locals.insert("n".into(), Value::Int(next));
                Ok([("n".to_string(), Value::Int(next))].into_iter().collect())
            })),
            "fail" => Some(Arc::new(|_payload: &Payload, _ctx: &mut HandlerCtx| {
                Err("deliberate handler failure".to_string())
            })),
            "chain_inc" => Some(Arc::new(|payload: &Payload, ctx: &mut HandlerCtx| {
                let (Some(Value::Str(sender)), Some(Value::Str(contract))) =
                    (payload.get("sender"), payload.get("contract"))
                else {
                    return Err("chain_inc needs sender and contract addresses".into());
                };
                ctx.effects.push(ChainEffect::Invoke {
                    sender: crate::canonical::Digest(sender.clone()),
                    contract: crate::canonical::Digest(contract.clone()),
                    function: "inc".into(),
                    args: Vec::new(),
                    max_fee: match payload.get("max_fee") {
                        Some(Value::Int(n)) if *n >= 0 => *n as u64,
                        _ => 100,
                    },
                });
                Ok([("relayed".to_string(), Value::Bool(true))].into_iter().collect())
            })),
            _ => None,
        }
    }

    pub fn known_ids() -> &'static [&'static str] {
        &["echo", "sleep_then_echo", "local_count", "fail", "chain_inc"]
    }
}
