//! Guarded-command contract machine.
//!
//! A contract is a set of named functions; each function body is an ordered
//! list of guarded commands. Execution walks the commands, evaluates each
//! guard, and runs the actions of every command whose guard holds until a
//! `return` or `revert` stops it. Metering is structural: one step per guard
//! evaluated plus one per action executed, and the fee is `steps * gas_price`.
//! Exceeding `max_fee` aborts with `OutOfGas` and charges the full `max_fee`;
//! a revert keeps the fee for the steps actually executed and rolls back all
//! storage writes and buffered events. Calls that are rejected before the
//! body runs (unknown function, bad arity or argument type, missing grant on
//! a restricted function) charge a minimal one-step fee.
//!
//! A contract's address is the digest of its canonical definition, so
//! identical code always lands at the identical address and redeploying it
//! is an error. The definition deliberately excludes the deployer: who
//! deployed is deployment metadata, recorded next to the installed code.
//!
//! One native contract exists, the deploy registry. It is addressed by the
//! digest of a reserved descriptor and records each deployment on chain when
//! the accompanying system transaction executes.

pub mod expr;

use crate::canonical::{canonical_bytes, Digest};
use crate::events::EventKind;
use crate::identity::{AccountRegistry, Address};
use crate::state::{Storage, WorldState};
use crate::value::{Payload, Value};
use expr::{eval, EvalCtx, Expr};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Payload key naming the off-chain endpoint an `ExternalCallRequested`
/// event wants invoked.
pub const ORACLE_KEY_ENDPOINT: &str = "endpoint";
/// Payload key naming the contract function to call back with the result.
pub const ORACLE_KEY_CALLBACK: &str = "cb";
/// Payload key carrying an opaque correlation value echoed back as the
/// first callback argument.
pub const ORACLE_KEY_CORR: &str = "corr";
/// Prefix for payload keys that carry positional arguments to the endpoint.
pub const ORACLE_ARG_PREFIX: &str = "arg:";

/// Steps billed by the native deploy registry per recorded deployment.
pub const NATIVE_DEPLOY_STEPS: u64 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeployError {
    #[error("contract already deployed at {0}")]
    ContractExists(Address),
    #[error("invalid contract definition: {0}")]
    InvalidDefinition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Int,
    Bool,
    Str,
    /// Accepts any scalar. Used where callers pass through opaque values.
    Any,
}

impl ParamType {
    pub fn accepts(&self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ParamType::Any, _)
                | (ParamType::Int, Value::Int(_))
                | (ParamType::Bool, Value::Bool(_))
                | (ParamType::Str, Value::Str(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// `set(key_expr, value_expr)`: write a storage key.
    Set(Expr, Expr),
    /// Emit an event; payload expressions are evaluated at execution time.
    Emit {
        kind: EventKind,
        name: String,
        payload: BTreeMap<String, Expr>,
    },
    /// Stop successfully, optionally with a value.
    Return(Option<Expr>),
    /// Abort, rolling back writes and discarding buffered events.
    Revert(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardedCommand {
    pub guard: Expr,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub params: Vec<ParamType>,
    pub body: Vec<GuardedCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractDefinition {
    pub functions: BTreeMap<String, FunctionDef>,
    /// Functions callable only by accounts holding a grant.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub restricted: BTreeSet<String>,
}

impl ContractDefinition {
    /// The address this definition deploys to: a digest of its canonical
    /// bytes. Equal definitions always share an address.
    pub fn address(&self) -> Address {
        Digest::of_bytes(&canonical_bytes(self))
    }

    pub fn validate(&self) -> Result<(), DeployError> {
        if self.functions.is_empty() {
            return Err(DeployError::InvalidDefinition(
                "definition declares no functions".into(),
            ));
        }
        for name in &self.restricted {
            if !self.functions.contains_key(name) {
                return Err(DeployError::InvalidDefinition(format!(
                    "restricted entry {name:?} names no declared function"
                )));
            }
        }
        for (name, func) in &self.functions {
            if name.is_empty() {
                return Err(DeployError::InvalidDefinition(
                    "function names must be non-empty".into(),
                ));
            }
            let arity = func.params.len();
            let check = |expr: &Expr| -> Result<(), DeployError> {
                match expr.max_arg_index() {
                    Some(i) if i >= arity => Err(DeployError::InvalidDefinition(format!(
                        "function {name:?} references argument {i} but declares arity {arity}"
                    ))),
                    _ => Ok(()),
                }
            };
            for gc in &func.body {
                check(&gc.guard)?;
                for action in &gc.actions {
                    match action {
                        Action::Set(k, v) => {
                            check(k)?;
                            check(v)?;
                        }
                        Action::Emit { payload, .. } => {
                            for e in payload.values() {
                                check(e)?;
                            }
                        }
                        Action::Return(Some(e)) => check(e)?,
                        Action::Return(None) | Action::Revert(_) => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// Code installed at an address.
#[derive(Debug, Clone)]
pub enum ContractCode {
    Guarded(ContractDefinition),
    /// Native deployment record keeper.
    DeployRegistry,
}

#[derive(Debug, Clone)]
pub struct InstalledContract {
    pub code: ContractCode,
    /// Absent for protocol builtins.
    pub deployer: Option<Address>,
}

/// Installed contracts by address. Installation is monotone: definitions are
/// immutable and survive chain reorganizations, which only roll back state.
#[derive(Debug, Clone, Default)]
pub struct ContractStore {
    contracts: BTreeMap<Address, InstalledContract>,
}

/// Reserved canonical descriptor addressing the native deploy registry.
fn deploy_registry_descriptor() -> serde_json::Value {
    serde_json::json!({"builtin": "deploy-registry", "version": 1})
}

pub fn deploy_registry_address() -> Address {
    Digest::of_bytes(&canonical_bytes(&deploy_registry_descriptor()))
}

pub fn name_service_address() -> Address {
    templates::name_service().address()
}

impl ContractStore {
    /// A store with the protocol builtins installed: the native deploy
    /// registry and the name service contract.
    pub fn bootstrap() -> ContractStore {
        let mut store = ContractStore::default();
        store.contracts.insert(
            deploy_registry_address(),
            InstalledContract {
                code: ContractCode::DeployRegistry,
                deployer: None,
            },
        );
        store.contracts.insert(
            name_service_address(),
            InstalledContract {
                code: ContractCode::Guarded(templates::name_service()),
                deployer: None,
            },
        );
        store
    }

    pub fn install(
        &mut self,
        definition: ContractDefinition,
        deployer: Address,
    ) -> Result<Address, DeployError> {
        definition.validate()?;
        let address = definition.address();
        if self.contracts.contains_key(&address) {
            return Err(DeployError::ContractExists(address));
        }
        self.contracts.insert(
            address.clone(),
            InstalledContract {
                code: ContractCode::Guarded(definition),
                deployer: Some(deployer),
            },
        );
        Ok(address)
    }

    pub fn get(&self, address: &Address) -> Option<&InstalledContract> {
        self.contracts.get(address)
    }

    pub fn contains(&self, address: &Address) -> bool {
        self.contracts.contains_key(address)
    }

    pub fn deployer_of(&self, address: &Address) -> Option<&Address> {
        self.contracts.get(address).and_then(|c| c.deployer.as_ref())
    }
}

/// Event produced during execution, before the ledger assigns chain
/// coordinates. The emitter is always the called contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmittedEvent {
    pub kind: EventKind,
    pub name: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecOutcome {
    Returned(Option<Value>),
    Reverted(String),
    OutOfGas,
    Unauthorized,
}

impl ExecOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ExecOutcome::Returned(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecRecord {
    pub outcome: ExecOutcome,
    pub steps: u64,
    pub fee: u64,
    pub events: Vec<EmittedEvent>,
}

pub struct CallInput<'a> {
    pub sender: &'a Address,
    pub contract: &'a Address,
    pub function: &'a str,
    pub args: &'a [Value],
    pub max_fee: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct BlockCtx {
    pub height: u64,
    pub gas_price: u64,
}

struct Meter {
    steps: u64,
    gas_price: u64,
    max_fee: u64,
}

impl Meter {
    /// Counts one step, or fails when the step would push the fee past
    /// `max_fee`.
    fn step(&mut self) -> Result<(), ()> {
        let next = self.steps + 1;
        if self.gas_price > 0 && next.saturating_mul(self.gas_price) > self.max_fee {
            return Err(());
        }
        self.steps = next;
        Ok(())
    }

    fn fee(&self) -> u64 {
        self.steps.saturating_mul(self.gas_price)
    }
}

/// Executes one call against world state, charging the fee to the sender.
/// All failure modes are expressed as outcomes, never as panics or errors:
/// a block can always record what happened.
pub fn execute(
    store: &ContractStore,
    state: &mut WorldState,
    registry: &AccountRegistry,
    call: &CallInput<'_>,
    block: BlockCtx,
) -> ExecRecord {
    let Some(installed) = store.get(call.contract) else {
        return minimal_reject(
            state,
            call,
            block,
            ExecOutcome::Reverted("unknown contract".into()),
        );
    };
    if let ContractCode::Guarded(def) = &installed.code {
        if def.restricted.contains(call.function)
            && !registry.has_grant(call.sender, call.contract, call.function)
        {
            return minimal_reject(state, call, block, ExecOutcome::Unauthorized);
        }
    }
    match &installed.code {
        ContractCode::DeployRegistry => exec_deploy_registry(state, call, block),
        ContractCode::Guarded(def) => exec_guarded(def, state, call, block),
    }
}

/// One-step rejection for calls that never reach a function body.
fn minimal_reject(
    state: &mut WorldState,
    call: &CallInput<'_>,
    block: BlockCtx,
    outcome: ExecOutcome,
) -> ExecRecord {
    let fee = block.gas_price.min(call.max_fee);
    state.charge(call.sender, fee);
    ExecRecord {
        outcome,
        steps: 1,
        fee,
        events: Vec::new(),
    }
}

fn exec_guarded(
    def: &ContractDefinition,
    state: &mut WorldState,
    call: &CallInput<'_>,
    block: BlockCtx,
) -> ExecRecord {
    let Some(func) = def.functions.get(call.function) else {
        return minimal_reject(
            state,
            call,
            block,
            ExecOutcome::Reverted(format!("unknown function {:?}", call.function)),
        );
    };
    if func.params.len() != call.args.len() {
        return minimal_reject(
            state,
            call,
            block,
            ExecOutcome::Reverted(format!(
                "arity mismatch: expected {} arguments, got {}",
                func.params.len(),
                call.args.len()
            )),
        );
    }
    for (i, (param, arg)) in func.params.iter().zip(call.args).enumerate() {
        if !param.accepts(arg) {
            return minimal_reject(
                state,
                call,
                block,
                ExecOutcome::Reverted(format!(
                    "argument {i} has type {}, expected {param:?}",
                    arg.type_name()
                )),
            );
        }
    }

    let mut meter = Meter {
        steps: 0,
        gas_price: block.gas_price,
        max_fee: call.max_fee,
    };
    // Work on a copy: only a successful return commits writes and events.
    let mut storage: Storage = state.storage(call.contract).cloned().unwrap_or_default();
    let mut events: Vec<EmittedEvent> = Vec::new();
    let mut outcome: Option<ExecOutcome> = None;

    'body: for gc in &func.body {
        if meter.step().is_err() {
            outcome = Some(ExecOutcome::OutOfGas);
            break;
        }
        let ctx = EvalCtx {
            args: call.args,
            storage: &storage,
            sender: call.sender,
            block_height: block.height,
        };
        let guard = match eval(&gc.guard, &ctx) {
            Ok(Value::Bool(b)) => b,
            Ok(other) => {
                outcome = Some(ExecOutcome::Reverted(format!(
                    "guard must evaluate to a boolean, got {}",
                    other.type_name()
                )));
                break;
            }
            Err(msg) => {
                outcome = Some(ExecOutcome::Reverted(msg));
                break;
            }
        };
        if !guard {
            continue;
        }
        for action in &gc.actions {
            if meter.step().is_err() {
                outcome = Some(ExecOutcome::OutOfGas);
                break 'body;
            }
            let ctx = EvalCtx {
                args: call.args,
                storage: &storage,
                sender: call.sender,
                block_height: block.height,
            };
            match action {
                Action::Set(key, value) => {
                    let result = eval(key, &ctx).and_then(|k| {
                        let k = k.as_str().map(str::to_string).ok_or_else(|| {
                            format!("set key must be a string, got {}", k.type_name())
                        })?;
                        Ok((k, eval(value, &ctx)?))
                    });
                    match result {
                        Ok((k, v)) => {
                            storage.insert(k, v);
                        }
                        Err(msg) => {
                            outcome = Some(ExecOutcome::Reverted(msg));
                            break 'body;
                        }
                    }
                }
                Action::Emit {
                    kind,
                    name,
                    payload,
                } => {
                    let mut evaluated = Payload::new();
                    let mut failed = None;
                    for (k, e) in payload {
                        match eval(e, &ctx) {
                            Ok(v) => {
                                evaluated.insert(k.clone(), v);
                            }
                            Err(msg) => {
                                failed = Some(msg);
                                break;
                            }
                        }
                    }
                    if let Some(msg) = failed {
                        outcome = Some(ExecOutcome::Reverted(msg));
                        break 'body;
                    }
                    events.push(EmittedEvent {
                        kind: *kind,
                        name: name.clone(),
                        payload: evaluated,
                    });
                }
                Action::Return(e) => {
                    match e.as_ref().map(|e| eval(e, &ctx)).transpose() {
                        Ok(v) => outcome = Some(ExecOutcome::Returned(v)),
                        Err(msg) => outcome = Some(ExecOutcome::Reverted(msg)),
                    }
                    break 'body;
                }
                Action::Revert(reason) => {
                    outcome = Some(ExecOutcome::Reverted(reason.clone()));
                    break 'body;
                }
            }
        }
    }

    let outcome = outcome.unwrap_or(ExecOutcome::Returned(None));
    let fee = match outcome {
        ExecOutcome::OutOfGas => call.max_fee,
        _ => meter.fee(),
    };
    state.charge(call.sender, fee);
    if outcome.is_success() {
        if !storage.is_empty() {
            state.storages.insert(call.contract.clone(), storage);
        }
        ExecRecord {
            outcome,
            steps: meter.steps,
            fee,
            events,
        }
    } else {
        ExecRecord {
            outcome,
            steps: meter.steps,
            fee,
            events: Vec::new(),
        }
    }
}

/// Native execution of the deploy registry: records a deployment marker and
/// announces the address. Billed as a fixed number of steps.
fn exec_deploy_registry(
    state: &mut WorldState,
    call: &CallInput<'_>,
    block: BlockCtx,
) -> ExecRecord {
    if call.function != "deploy" {
        return minimal_reject(
            state,
            call,
            block,
            ExecOutcome::Reverted(format!("unknown function {:?}", call.function)),
        );
    }
    let definition_text = match call.args {
        [Value::Str(s)] => s,
        _ => {
            return minimal_reject(
                state,
                call,
                block,
                ExecOutcome::Reverted("deploy expects one string argument".into()),
            )
        }
    };
    let Ok(definition) = serde_json::from_str::<ContractDefinition>(definition_text) else {
        return minimal_reject(
            state,
            call,
            block,
            ExecOutcome::Reverted("malformed contract definition".into()),
        );
    };
    if block.gas_price > 0 && NATIVE_DEPLOY_STEPS.saturating_mul(block.gas_price) > call.max_fee {
        state.charge(call.sender, call.max_fee);
        return ExecRecord {
            outcome: ExecOutcome::OutOfGas,
            steps: 0,
            fee: call.max_fee,
            events: Vec::new(),
        };
    }
    let address = definition.address();
    let fee = NATIVE_DEPLOY_STEPS * block.gas_price;
    state.charge(call.sender, fee);
    state
        .storage_mut(call.contract)
        .insert(format!("deployed:{address}"), Value::Int(1));
    ExecRecord {
        outcome: ExecOutcome::Returned(Some(Value::Str(address.to_string()))),
        steps: NATIVE_DEPLOY_STEPS,
        fee,
        events: vec![EmittedEvent {
            kind: EventKind::ContractState,
            name: "ContractDeployed".into(),
            payload: [("address".to_string(), Value::Str(address.to_string()))]
                .into_iter()
                .collect(),
        }],
    }
}

pub mod templates {
    //! Reusable contract definitions for scenarios and tests.

    use super::*;

    /// Counter with an unconditional `inc()` and a guarded `bump(n)`.
    ///
    /// `inc` runs exactly three steps: guard, storage write, event.
    pub fn counter() -> ContractDefinition {
        let inc = FunctionDef {
            params: vec![],
            body: vec![GuardedCommand {
                guard: Expr::lit(true),
                actions: vec![
                    Action::Set(
                        Expr::lit("count"),
                        Expr::add(Expr::state_key("count"), Expr::lit(1)),
                    ),
                    Action::Emit {
                        kind: EventKind::ContractState,
                        name: "CountChanged".into(),
                        payload: [("value".to_string(), Expr::state_key("count"))]
                            .into_iter()
                            .collect(),
                    },
                ],
            }],
        };
        let bump = FunctionDef {
            params: vec![ParamType::Int],
            body: vec![
                GuardedCommand {
                    guard: Expr::lt(Expr::lit(0), Expr::arg(0)),
                    actions: vec![
                        Action::Set(
                            Expr::lit("count"),
                            Expr::add(Expr::state_key("count"), Expr::arg(0)),
                        ),
                        Action::Emit {
                            kind: EventKind::ContractState,
                            name: "CountChanged".into(),
                            payload: [("value".to_string(), Expr::state_key("count"))]
                                .into_iter()
                                .collect(),
                        },
                        Action::Return(Some(Expr::state_key("count"))),
                    ],
                },
                GuardedCommand {
                    guard: Expr::lit(true),
                    actions: vec![Action::Revert("bump requires a positive amount".into())],
                },
            ],
        };
        ContractDefinition {
            functions: [("inc".to_string(), inc), ("bump".to_string(), bump)]
                .into_iter()
                .collect(),
            restricted: BTreeSet::new(),
        }
    }

    /// Name ownership ledger. `register(name, target)` claims a free name or
    /// re-points one the sender already owns; anyone else is reverted.
    /// Pointers live under `ptr:<name>`, owners under `own:<name>`.
    pub fn name_service() -> ContractDefinition {
        let own_key = || Expr::concat(Expr::lit("own:"), Expr::arg(0));
        let ptr_key = || Expr::concat(Expr::lit("ptr:"), Expr::arg(0));
        let register = FunctionDef {
            params: vec![ParamType::Str, ParamType::Str],
            body: vec![
                GuardedCommand {
                    // Unset owner reads as integer 0.
                    guard: Expr::or(
                        Expr::eq(Expr::state(own_key()), Expr::lit(0)),
                        Expr::eq(Expr::state(own_key()), Expr::Sender),
                    ),
                    actions: vec![
                        Action::Set(own_key(), Expr::Sender),
                        Action::Set(ptr_key(), Expr::arg(1)),
                        Action::Emit {
                            kind: EventKind::ContractState,
                            name: "NameRegistered".into(),
                            payload: [
                                ("name".to_string(), Expr::arg(0)),
                                ("target".to_string(), Expr::arg(1)),
                            ]
                            .into_iter()
                            .collect(),
                        },
                        Action::Return(Some(Expr::arg(1))),
                    ],
                },
                GuardedCommand {
                    guard: Expr::lit(true),
                    actions: vec![Action::Revert("NameOwnedByOther".into())],
                },
            ],
        };
        ContractDefinition {
            functions: [("register".to_string(), register)].into_iter().collect(),
            restricted: BTreeSet::new(),
        }
    }

    /// Client for the off-chain call relay: `request(endpoint, value)`
    /// emits an `ExternalCallRequested` event carrying `value` as the
    /// endpoint argument; `on_result(corr, status, result)` stores the
    /// relayed answer under `result` or `error`.
    pub fn oracle_client() -> ContractDefinition {
        let request = FunctionDef {
            params: vec![ParamType::Str, ParamType::Any],
            body: vec![GuardedCommand {
                guard: Expr::lit(true),
                actions: vec![Action::Emit {
                    kind: EventKind::ExternalCallRequested,
                    name: "CallRequested".into(),
                    payload: [
                        (ORACLE_KEY_ENDPOINT.to_string(), Expr::arg(0)),
                        (ORACLE_KEY_CALLBACK.to_string(), Expr::lit("on_result")),
                        (format!("{ORACLE_ARG_PREFIX}value"), Expr::arg(1)),
                    ]
                    .into_iter()
                    .collect(),
                }],
            }],
        };
        let on_result = FunctionDef {
            params: vec![ParamType::Str, ParamType::Str, ParamType::Any],
            body: vec![
                GuardedCommand {
                    guard: Expr::eq(Expr::arg(1), Expr::lit("ok")),
                    actions: vec![
                        Action::Set(Expr::lit("result"), Expr::arg(2)),
                        Action::Emit {
                            kind: EventKind::ContractState,
                            name: "ResultStored".into(),
                            payload: [("value".to_string(), Expr::arg(2))].into_iter().collect(),
                        },
                        Action::Return(Some(Expr::arg(2))),
                    ],
                },
                GuardedCommand {
                    guard: Expr::lit(true),
                    actions: vec![
                        Action::Set(Expr::lit("error"), Expr::arg(2)),
                        Action::Return(Some(Expr::arg(2))),
                    ],
                },
            ],
        };
        ContractDefinition {
            functions: [
                ("request".to_string(), request),
                ("on_result".to_string(), on_result),
            ]
            .into_iter()
            .collect(),
            restricted: BTreeSet::new(),
        }
    }
}
