//! In-memory workflow runner.
//!
//! The engine holds instance state (variables, cursor, waits) off chain and
//! uses the chain only where a step demands it: contract calls go through
//! the gateway with await-durability tracking, event waits become pull
//! subscriptions. Each `pump` advances every live instance by at most one
//! step, so interleavings are deterministic and easy to trace.

use super::{ArgSource, CmpOp, WorkflowDefinition, WorkflowStep};
use crate::canonical::canonical_string;
use crate::canonical::Digest;
use crate::contract_vm::ExecOutcome;
use crate::faas::FaasPlatform;
use crate::gateway::{
    event_summary, scalarize_payload, Delivery, DeliveryTarget, Gateway, InvocationMode,
    TxPhase, MAX_PAYLOAD_BYTES,
};
use crate::identity::Address;
use crate::ledger::{Node, TxId};
use crate::value::{Payload, Value};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("no workflow registered under this id")]
    UnknownWorkflow,
    #[error("an instance with this id already exists")]
    InstanceExists,
    #[error("missing input variable {0}")]
    MissingInput(String),
    #[error("input {0} is not declared by the workflow")]
    UnexpectedInput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Running,
    Completed,
    Failed { reason: String },
}

/// What a running instance is currently blocked on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepWait {
    None,
    Call { tx_id: TxId },
    Event { subscription: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTraceEntry {
    pub step: usize,
    pub value: Value,
    pub tick: u64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub workflow: String,
    pub vars: BTreeMap<String, Value>,
    pub cursor: usize,
    pub wait: StepWait,
    pub status: InstanceStatus,
    pub trace: Vec<StepTraceEntry>,
}

impl Instance {
    /// `(step, value)` pairs in completion order — the shape compared
    /// against an on-chain run of the same workflow.
    pub fn step_trace(&self) -> Vec<(u64, Value)> {
        self.trace
            .iter()
            .map(|e| (e.step as u64, e.value.clone()))
            .collect()
    }
}

#[derive(Debug)]
pub struct OffChainEngine {
    workflows: BTreeMap<String, WorkflowDefinition>,
    pub instances: BTreeMap<String, Instance>,
    /// Chain account the engine signs contract-call steps with.
    account: Address,
}

impl OffChainEngine {
    pub fn new(account: Address) -> OffChainEngine {
        OffChainEngine {
            workflows: BTreeMap::new(),
            instances: BTreeMap::new(),
            account,
        }
    }

    pub fn account(&self) -> &Address {
        &self.account
    }

    pub fn register_workflow(&mut self, def: WorkflowDefinition) {
        self.workflows.insert(def.id.clone(), def);
    }

    pub fn workflow(&self, id: &str) -> Option<&WorkflowDefinition> {
        self.workflows.get(id)
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.get(id)
    }

    pub fn start_instance(
        &mut self,
        workflow: &str,
        instance_id: &str,
        inputs: BTreeMap<String, Value>,
    ) -> Result<(), EngineError> {
        let def = self
            .workflows
            .get(workflow)
            .ok_or(EngineError::UnknownWorkflow)?;
        if self.instances.contains_key(instance_id) {
            return Err(EngineError::InstanceExists);
        }
        for declared in &def.inputs {
            if !inputs.contains_key(declared) {
                return Err(EngineError::MissingInput(declared.clone()));
            }
        }
        for provided in inputs.keys() {
            if !def.inputs.contains(provided) {
                return Err(EngineError::UnexpectedInput(provided.clone()));
            }
        }
        self.instances.insert(
            instance_id.to_string(),
            Instance {
                id: instance_id.to_string(),
                workflow: workflow.to_string(),
                vars: inputs,
                cursor: 0,
                wait: StepWait::None,
                status: InstanceStatus::Running,
                trace: Vec::new(),
            },
        );
        Ok(())
    }

    /// Advances every running instance by at most one step. `deliveries`
    /// are the queue-target deliveries drained from the gateway this tick;
    /// instances waiting on events consume the ones addressed to them.
    pub fn pump(
        &mut self,
        node: &mut Node,
        gateway: &mut Gateway,
        platforms: &mut BTreeMap<String, FaasPlatform>,
        deliveries: &[Delivery],
    ) {
        let mut instances = std::mem::take(&mut self.instances);
        for instance in instances.values_mut() {
            if instance.status == InstanceStatus::Running {
                self.step_instance(instance, node, gateway, platforms, deliveries);
            }
        }
        self.instances = instances;
    }

    fn step_instance(
        &self,
        instance: &mut Instance,
        node: &mut Node,
        gateway: &mut Gateway,
        platforms: &mut BTreeMap<String, FaasPlatform>,
        deliveries: &[Delivery],
    ) {
        let Some(def) = self.workflows.get(&instance.workflow) else {
            instance.status = InstanceStatus::Failed {
                reason: "workflow definition disappeared".into(),
            };
            return;
        };
        let tick = node.clock();
        match instance.wait.clone() {
            StepWait::Call { tx_id } => {
                match gateway.call_phase(&tx_id) {
                    Some(TxPhase::Durable { .. }) => {
                        let value = match node.receipt(&tx_id) {
                            Some(r) => match &r.record.outcome {
                                ExecOutcome::Returned(Some(v)) => v.clone(),
                                ExecOutcome::Returned(None) => Value::str(""),
                                other => {
                                    fail(instance, format!("contract call failed: {other:?}"));
                                    return;
                                }
                            },
                            None => {
                                fail(instance, "durable call has no receipt".into());
                                return;
                            }
                        };
                        instance.wait = StepWait::None;
                        complete_step(instance, def, value, tick);
                    }
                    Some(TxPhase::Dropped { reason }) => {
                        fail(instance, format!("contract call dropped: {reason}"));
                    }
                    _ => {} // still pending or included
                }
            }
            StepWait::Event { subscription } => {
                if let Some(delivery) = deliveries
                    .iter()
                    .find(|d| d.subscription == subscription)
                {
                    gateway.unsubscribe(subscription);
                    instance.wait = StepWait::None;
                    let value = Value::Str(event_summary(
                        &delivery.event.name,
                        &delivery.event.payload,
                    ));
                    complete_step(instance, def, value, tick);
                }
            }
            StepWait::None => {
                let Some(step) = def.steps.get(instance.cursor) else {
                    instance.status = InstanceStatus::Completed;
                    return;
                };
                match step.clone() {
                    WorkflowStep::FunctionCall {
                        platform,
                        function,
                        args,
                        ..
                    } => {
                        let Some(p) = platforms.get_mut(&platform) else {
                            fail(instance, format!("unknown platform {platform}"));
                            return;
                        };
                        let mut payload = Payload::new();
                        for (name, source) in args {
                            match resolve_arg(&source, &instance.vars) {
                                Ok(v) => {
                                    payload.insert(name, v);
                                }
                                Err(e) => {
                                    fail(instance, e);
                                    return;
                                }
                            }
                        }
                        let res = p.invoke_sync(&function, payload, tick);
                        match res.outcome {
                            Ok(out) => {
                                complete_step(instance, def, scalarize_payload(&out), tick)
                            }
                            Err(e) => fail(instance, format!("function call failed: {e}")),
                        }
                    }
                    WorkflowStep::ContractCall {
                        contract,
                        function,
                        args,
                        durability_k,
                        ..
                    } => {
                        let address = match node.resolve_name(&contract) {
                            Some(addr) => addr,
                            None => Digest(contract.clone()),
                        };
                        let mut call_args = Vec::new();
                        for source in &args {
                            match resolve_arg(source, &instance.vars) {
                                Ok(v) => call_args.push(v),
                                Err(e) => {
                                    fail(instance, e);
                                    return;
                                }
                            }
                        }
                        match gateway.invoke(
                            node,
                            &self.account,
                            &address,
                            &function,
                            call_args,
                            gateway.config.oracle_max_fee,
                            InvocationMode::AwaitDurability { k: durability_k },
                        ) {
                            Ok(tx_id) => instance.wait = StepWait::Call { tx_id },
                            Err(e) => fail(instance, format!("contract call rejected: {e}")),
                        }
                    }
                    WorkflowStep::EventWait { event, .. } => {
                        let subscription = gateway.subscribe(
                            node,
                            crate::events::EventFilter::by_name(&event),
                            DeliveryTarget::Queue,
                            1,
                        );
                        instance.wait = StepWait::Event { subscription };
                    }
                    WorkflowStep::Choice {
                        var,
                        op,
                        value,
                        then_goto,
                        else_goto,
                        assign,
                    } => {
                        let current = instance.vars.get(&var).cloned();
                        let taken = match evaluate(&current, op, &value) {
                            Ok(b) => b,
                            Err(e) => {
                                fail(instance, e);
                                return;
                            }
                        };
                        let (label, target) = if taken {
                            ("then", then_goto)
                        } else {
                            ("else", else_goto)
                        };
                        let step_index = instance.cursor;
                        instance.vars.insert(assign, Value::str(label));
                        instance.trace.push(StepTraceEntry {
                            step: step_index,
                            value: Value::str(label),
                            tick,
                        });
                        instance.cursor = target;
                        if instance.cursor >= def.steps.len() {
                            instance.status = InstanceStatus::Completed;
                        }
                    }
                }
            }
        }
    }
}

fn resolve_arg(source: &ArgSource, vars: &BTreeMap<String, Value>) -> Result<Value, String> {
    match source {
        ArgSource::Lit(v) => Ok(v.clone()),
        ArgSource::Var(name) => vars
            .get(name)
            .cloned()
            .ok_or_else(|| format!("variable {name} is unbound")),
    }
}

fn evaluate(current: &Option<Value>, op: CmpOp, rhs: &Value) -> Result<bool, String> {
    let Some(lhs) = current else {
        return Err("choice variable is unbound".into());
    };
    match op {
        CmpOp::Eq => Ok(lhs == rhs),
        CmpOp::Ne => Ok(lhs != rhs),
        CmpOp::Lt | CmpOp::Ge => match (lhs, rhs) {
            (Value::Int(a), Value::Int(b)) => Ok(if op == CmpOp::Lt { a < b } else { a >= b }),
            _ => Err("ordered comparison requires integers".into()),
        },
    }
}

/// Records the result of the step at the cursor and moves control forward.
/// Values larger than the storage cap fail the instance instead of silently
/// truncating.
fn complete_step(instance: &mut Instance, def: &WorkflowDefinition, value: Value, tick: u64) {
    if canonical_string(&value).len() > MAX_PAYLOAD_BYTES {
        fail(instance, "step result exceeds the variable size cap".into());
        return;
    }
    let step_index = instance.cursor;
    let step = &def.steps[step_index];
    instance.vars.insert(step.assign().to_string(), value.clone());
    instance.trace.push(StepTraceEntry {
        step: step_index,
        value,
        tick,
    });
    instance.cursor = step.targets(step_index)[0];
    if instance.cursor >= def.steps.len() {
        instance.status = InstanceStatus::Completed;
    }
}

fn fail(instance: &mut Instance, reason: String) {
    instance.status = InstanceStatus::Failed { reason };
}
