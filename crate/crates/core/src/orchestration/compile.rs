//! Compiles a workflow into a contract that runs it on chain.
//!
//! The compiled contract keeps all instance state in storage under
//! `inst:<id>:` keys and is moved forward purely by transactions:
//!
//! * `start(instance_id, <inputs…>)` initializes the variables and emits
//!   the request event for step 0;
//! * `advance(instance_id, status, result)` — restricted, normally granted
//!   to the off-chain call relay — applies a step result, records the
//!   completion, and emits the next step's request.
//!
//! Every step, branches included, is driven by exactly one `advance`
//! transaction: branch steps request the `@choice` no-op endpoint, whose
//! acknowledgement triggers the guarded commands that evaluate the
//! condition against stored variables. Step results are scalarized by the
//! relay with the same rules the in-memory engine uses, which is what makes
//! the two execution styles comparable trace-for-trace.

use super::{ArgSource, CmpOp, WorkflowDefinition, WorkflowError, WorkflowStep};
use crate::canonical::canonical_string;
use crate::contract_vm::expr::Expr;
use crate::contract_vm::{
    Action, ContractDefinition, FunctionDef, GuardedCommand, ParamType, ORACLE_ARG_PREFIX,
    ORACLE_KEY_CALLBACK, ORACLE_KEY_CORR, ORACLE_KEY_ENDPOINT,
};
use crate::events::EventKind;
use crate::gateway::{Gateway, InvocationMode};
use crate::identity::Address;
use crate::ledger::{Node, SubmitError, TxId};
use crate::value::Value;
use std::collections::BTreeMap;
use thiserror::Error;

/// Name of the request events the compiled contract emits.
pub const STEP_REQUEST_EVENT: &str = "StepRequested";

/// Storage key expression `inst:<arg0>:<suffix>`.
fn key(suffix: &str) -> Expr {
    Expr::concat_all(vec![
        Expr::lit("inst:"),
        Expr::arg(0),
        Expr::lit(format!(":{suffix}")),
    ])
}

fn var_key(name: &str) -> Expr {
    key(&format!("var:{name}"))
}

fn arg_expr(source: &ArgSource) -> Expr {
    match source {
        ArgSource::Lit(v) => Expr::lit(v.clone()),
        ArgSource::Var(name) => Expr::state(var_key(name)),
    }
}

/// Emit for "control has arrived at `target`": either the request event for
/// that step or the completion marker when `target` is one past the end.
fn emit_for_target(
    def: &WorkflowDefinition,
    target: usize,
) -> Result<Action, WorkflowError> {
    if target >= def.steps.len() {
        return Ok(Action::Emit {
            kind: EventKind::BusinessLogic,
            name: "InstanceCompleted".into(),
            payload: [("instance".to_string(), Expr::arg(0))].into_iter().collect(),
        });
    }
    let step = &def.steps[target];
    let mut payload: BTreeMap<String, Expr> = BTreeMap::new();
    payload.insert(ORACLE_KEY_CALLBACK.to_string(), Expr::lit("advance"));
    payload.insert(ORACLE_KEY_CORR.to_string(), Expr::arg(0));
    match step {
        WorkflowStep::FunctionCall {
            platform,
            function,
            args,
            ..
        } => {
            payload.insert(
                ORACLE_KEY_ENDPOINT.to_string(),
                Expr::lit(format!("faas:{platform}/{function}")),
            );
            for (name, source) in args {
                payload.insert(format!("{ORACLE_ARG_PREFIX}{name}"), arg_expr(source));
            }
        }
        WorkflowStep::ContractCall {
            contract,
            function,
            args,
            durability_k,
            ..
        } => {
            let mut literals = Vec::new();
            for source in args {
                match source {
                    ArgSource::Lit(v) => literals.push(v.clone()),
                    ArgSource::Var(_) => {
                        return Err(WorkflowError::UnsupportedVarArgs { step: target })
                    }
                }
            }
            payload.insert(ORACLE_KEY_ENDPOINT.to_string(), Expr::lit("@chain"));
            payload.insert(
                format!("{ORACLE_ARG_PREFIX}contract"),
                Expr::lit(contract.clone()),
            );
            payload.insert(
                format!("{ORACLE_ARG_PREFIX}function"),
                Expr::lit(function.clone()),
            );
            payload.insert(
                format!("{ORACLE_ARG_PREFIX}args"),
                Expr::lit(canonical_string(&literals)),
            );
            payload.insert(
                format!("{ORACLE_ARG_PREFIX}k"),
                Expr::lit(*durability_k as i64),
            );
        }
        WorkflowStep::EventWait { event, .. } => {
            payload.insert(ORACLE_KEY_ENDPOINT.to_string(), Expr::lit("@event-wait"));
            payload.insert(format!("{ORACLE_ARG_PREFIX}name"), Expr::lit(event.clone()));
        }
        WorkflowStep::Choice { .. } => {
            payload.insert(ORACLE_KEY_ENDPOINT.to_string(), Expr::lit("@choice"));
        }
    }
    Ok(Action::Emit {
        kind: EventKind::ExternalCallRequested,
        name: STEP_REQUEST_EVENT.into(),
        payload,
    })
}

fn step_completed_emit(k: usize, value: Expr) -> Action {
    Action::Emit {
        kind: EventKind::BusinessLogic,
        name: "StepCompleted".into(),
        payload: [
            ("instance".to_string(), Expr::arg(0)),
            ("step".to_string(), Expr::lit(k as i64)),
            ("value".to_string(), value),
        ]
        .into_iter()
        .collect(),
    }
}

fn comparison(op: CmpOp, lhs: Expr, rhs: Expr) -> Expr {
    match op {
        CmpOp::Eq => Expr::eq(lhs, rhs),
        CmpOp::Ne => Expr::ne(lhs, rhs),
        CmpOp::Lt => Expr::lt(lhs, rhs),
        CmpOp::Ge => Expr::ge(lhs, rhs),
    }
}

pub fn compile_workflow(def: &WorkflowDefinition) -> Result<ContractDefinition, WorkflowError> {
    super::validate_structure(def)?;
    let n = def.steps.len();

    // start(instance_id, <inputs…>)
    let mut start_params = vec![ParamType::Str];
    start_params.extend(def.inputs.iter().map(|_| ParamType::Any));
    let mut start_actions = vec![
        Action::Set(key("started"), Expr::lit(1)),
        Action::Set(key("step"), Expr::lit(0)),
    ];
    for (i, input) in def.inputs.iter().enumerate() {
        start_actions.push(Action::Set(var_key(input), Expr::arg(i + 1)));
    }
    start_actions.push(Action::Emit {
        kind: EventKind::BusinessLogic,
        name: "InstanceStarted".into(),
        payload: [("instance".to_string(), Expr::arg(0))].into_iter().collect(),
    });
    start_actions.push(emit_for_target(def, 0)?);
    start_actions.push(Action::Return(None));
    let start = FunctionDef {
        params: start_params,
        body: vec![
            GuardedCommand {
                guard: Expr::eq(Expr::state(key("started")), Expr::lit(0)),
                actions: start_actions,
            },
            GuardedCommand {
                guard: Expr::lit(true),
                actions: vec![Action::Revert("instance already started".into())],
            },
        ],
    };

    // advance(instance_id, status, result)
    let mut advance_body = vec![
        GuardedCommand {
            guard: Expr::eq(Expr::state(key("started")), Expr::lit(0)),
            actions: vec![Action::Revert("instance not started".into())],
        },
        GuardedCommand {
            guard: Expr::and(
                Expr::ne(Expr::arg(1), Expr::lit("ok")),
                Expr::eq(Expr::state(key("failed")), Expr::lit(0)),
            ),
            actions: vec![
                Action::Set(key("failed"), Expr::lit(1)),
                Action::Set(key("fail_reason"), Expr::arg(2)),
                Action::Emit {
                    kind: EventKind::BusinessLogic,
                    name: "StepFailed".into(),
                    payload: [
                        ("instance".to_string(), Expr::arg(0)),
                        ("step".to_string(), Expr::state(key("step"))),
                        ("reason".to_string(), Expr::arg(2)),
                    ]
                    .into_iter()
                    .collect(),
                },
                Action::Return(None),
            ],
        },
    ];
    for (k, step) in def.steps.iter().enumerate() {
        let base = || {
            Expr::and(
                Expr::eq(Expr::state(key("failed")), Expr::lit(0)),
                Expr::eq(Expr::state(key("step")), Expr::lit(k as i64)),
            )
        };
        match step {
            WorkflowStep::Choice {
                var,
                op,
                value,
                then_goto,
                else_goto,
                assign,
            } => {
                let cond = || {
                    comparison(*op, Expr::state(var_key(var)), Expr::lit(value.clone()))
                };
                for (label, target, guard) in [
                    ("then", *then_goto, Expr::and(base(), cond())),
                    ("else", *else_goto, Expr::and(base(), Expr::not(cond()))),
                ] {
                    advance_body.push(GuardedCommand {
                        guard,
                        actions: vec![
                            Action::Set(var_key(assign), Expr::lit(label)),
                            Action::Set(key("step"), Expr::lit(target as i64)),
                            step_completed_emit(k, Expr::lit(label)),
                            emit_for_target(def, target)?,
                            Action::Return(None),
                        ],
                    });
                }
            }
            other => {
                let target = other.targets(k)[0];
                advance_body.push(GuardedCommand {
                    guard: base(),
                    actions: vec![
                        Action::Set(var_key(other.assign()), Expr::arg(2)),
                        Action::Set(key("step"), Expr::lit(target as i64)),
                        step_completed_emit(k, Expr::arg(2)),
                        emit_for_target(def, target)?,
                        Action::Return(None),
                    ],
                });
            }
        }
    }
    advance_body.push(GuardedCommand {
        guard: Expr::lit(true),
        actions: vec![Action::Revert("no pending step".into())],
    });
    let advance = FunctionDef {
        params: vec![ParamType::Str, ParamType::Str, ParamType::Any],
        body: advance_body,
    };

    let _ = n;
    Ok(ContractDefinition {
        functions: [
            ("start".to_string(), start),
            ("advance".to_string(), advance),
        ]
        .into_iter()
        .collect(),
        restricted: ["advance".to_string()].into_iter().collect(),
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StartError {
    #[error("missing input variable {0}")]
    MissingInput(String),
    #[error(transparent)]
    Submit(#[from] SubmitError),
}

/// Starts an instance of a compiled workflow on chain (fire-and-forget).
pub fn start_onchain_instance(
    gateway: &mut Gateway,
    node: &mut Node,
    starter: &Address,
    contract: &Address,
    def: &WorkflowDefinition,
    instance_id: &str,
    inputs: &BTreeMap<String, Value>,
) -> Result<TxId, StartError> {
    let mut args = vec![Value::str(instance_id)];
    for input in &def.inputs {
        let v = inputs
            .get(input)
            .ok_or_else(|| StartError::MissingInput(input.clone()))?;
        args.push(v.clone());
    }
    let max_fee = gateway.config.oracle_max_fee;
    let tx = gateway.invoke(
        node,
        starter,
        contract,
        "start",
        args,
        max_fee,
        InvocationMode::FireAndForget,
    )?;
    Ok(tx)
}

/// `(step, value)` completions recorded on the current chain for one
/// instance, in chain order — directly comparable to
/// [`super::engine::Instance::step_trace`].
pub fn onchain_step_trace(node: &Node, contract: &Address, instance: &str) -> Vec<(u64, Value)> {
    let emitter = contract.to_string();
    let mut out = Vec::new();
    for block in node.blocks() {
        for event in &block.events {
            if event.name != "StepCompleted" || event.emitter != emitter {
                continue;
            }
            if event.payload.get("instance") != Some(&Value::str(instance)) {
                continue;
            }
            let Some(Value::Int(step)) = event.payload.get("step") else {
                continue;
            };
            let Some(value) = event.payload.get("value") else {
                continue;
            };
            out.push((*step as u64, value.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OnChainInstanceState {
    NotStarted,
    Running { pending_step: u64 },
    Completed,
    Failed { reason: String },
}

/// Reads an instance's progress from contract storage at the current tip.
pub fn onchain_instance_state(
    node: &Node,
    contract: &Address,
    def: &WorkflowDefinition,
    instance: &str,
) -> OnChainInstanceState {
    let get = |suffix: &str| node.storage_value(contract, &format!("inst:{instance}:{suffix}"));
    if get("started") != Some(Value::Int(1)) {
        return OnChainInstanceState::NotStarted;
    }
    if get("failed") == Some(Value::Int(1)) {
        let reason = match get("fail_reason") {
            Some(Value::Str(s)) => s,
            other => format!("{other:?}"),
        };
        return OnChainInstanceState::Failed { reason };
    }
    match get("step") {
        Some(Value::Int(s)) if (s as usize) >= def.steps.len() => OnChainInstanceState::Completed,
        Some(Value::Int(s)) => OnChainInstanceState::Running {
            pending_step: s as u64,
        },
        _ => OnChainInstanceState::Running { pending_step: 0 },
    }
}

/// Manually drives a compiled instance one step, as a granted caller would.
pub fn advance_onchain(
    node: &mut Node,
    sender: &Address,
    contract: &Address,
    instance: &str,
    status: &str,
    result: Value,
    max_fee: u64,
) -> Result<TxId, SubmitError> {
    let tx = node
        .build_transaction(
            sender,
            contract,
            "advance",
            vec![Value::str(instance), Value::str(status), result],
            max_fee,
        )
        .map_err(|_| SubmitError::InvalidSignature)?;
    node.submit_transaction(tx)
}
