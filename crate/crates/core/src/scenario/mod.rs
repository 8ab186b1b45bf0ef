//! Declarative scenario configurations and the runner that executes them.
//!
//! A [`ScenarioConfig`] describes a complete setup — chain parameters,
//! accounts, platforms and their functions, contracts, workflows,
//! subscriptions, bus routers, a call relay — plus a scripted series of
//! actions, and can be serialized to JSON. [`run_scenario`] builds the
//! corresponding [`Simulation`], seals the setup transactions into the
//! chain, then advances the configured number of ticks, firing actions at
//! their scheduled offsets. Identical configs produce identical traces.
//!
//! Each config names one of six scenario kinds; [`matrix`] records which
//! platform capabilities each kind requires and [`validate`] checks a
//! config against both its structure and those capability conditions.

pub mod cost;
pub mod matrix;
pub mod validate;

use crate::canonical::Digest;
use crate::contract_vm::{templates as contract_templates, ContractDefinition};
use crate::events::{EventFilter, EventKind};
use crate::faas::{catalog, FaasPlatform, DEFAULT_MAX_DURATION};
use crate::gateway::{DeliveryTarget, InvocationMode, OracleEndpoint, PublishError};
use crate::identity::{Address, IdentityError};
use crate::ledger::{
    ChainConfig, NameError, NodeDeployError, PermissionError, SubmitError,
};
use crate::message_bus::{bus_contract, MessageRouter};
use crate::orchestration::compile::{
    compile_workflow, onchain_instance_state, start_onchain_instance, OnChainInstanceState,
    StartError,
};
use crate::orchestration::engine::{EngineError, InstanceStatus, OffChainEngine};
use crate::orchestration::{
    templates as workflow_templates, WorkflowDefinition, WorkflowError, WorkflowStep,
};
use crate::sim::Simulation;
use crate::value::{Payload, Value};
use cost::Pricing;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use thiserror::Error;
use validate::{Finding, FindingLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "S1_EventEmitter")]
    S1EventEmitter,
    #[serde(rename = "S2_ContractAsFunction")]
    S2ContractAsFunction,
    #[serde(rename = "S3a_OrchSteps")]
    S3aOrchSteps,
    #[serde(rename = "S3b_OnChainEngine")]
    S3bOnChainEngine,
    #[serde(rename = "S4_MessageBus")]
    S4MessageBus,
    #[serde(rename = "S4_ProcessManager")]
    S4ProcessManager,
}

impl ScenarioKind {
    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::S1EventEmitter => "S1_EventEmitter",
            ScenarioKind::S2ContractAsFunction => "S2_ContractAsFunction",
            ScenarioKind::S3aOrchSteps => "S3a_OrchSteps",
            ScenarioKind::S3bOnChainEngine => "S3b_OnChainEngine",
            ScenarioKind::S4MessageBus => "S4_MessageBus",
            ScenarioKind::S4ProcessManager => "S4_ProcessManager",
        }
    }

    pub fn all() -> [ScenarioKind; 6] {
        [
            ScenarioKind::S1EventEmitter,
            ScenarioKind::S2ContractAsFunction,
            ScenarioKind::S3aOrchSteps,
            ScenarioKind::S3bOnChainEngine,
            ScenarioKind::S4MessageBus,
            ScenarioKind::S4ProcessManager,
        ]
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> u64 {
    1
}

fn default_max_duration() -> u64 {
    DEFAULT_MAX_DURATION
}

fn default_publish_fee() -> u64 {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountSpec {
    pub name: String,
    #[serde(default)]
    pub fund: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    /// Catalog id of the handler implementation.
    pub handler: String,
    #[serde(default = "default_max_duration")]
    pub max_duration: u64,
    #[serde(default)]
    pub timer_period: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub id: String,
    #[serde(default = "default_true")]
    pub native_integration: bool,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub name: String,
    /// Built-in contract template id.
    pub template: String,
    pub deployer: String,
    /// Also register `name → address` with the on-chain name service.
    #[serde(default)]
    pub register: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantSpec {
    pub grantee: String,
    pub contract: String,
    pub function: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowMode {
    OffChain,
    OnChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowSpec {
    pub name: String,
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default)]
    pub definition: Option<WorkflowDefinition>,
    pub mode: WorkflowMode,
    /// Account deploying the compiled contract (on-chain mode).
    #[serde(default)]
    pub deployer: Option<String>,
}

impl WorkflowSpec {
    pub fn resolve_definition(&self) -> Option<WorkflowDefinition> {
        match (&self.template, &self.definition) {
            (Some(id), None) => workflow_templates::workflow(id),
            (None, Some(def)) => Some(def.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Function { platform: String, function: String },
    Queue(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionSpec {
    #[serde(default)]
    pub kind: Option<EventKind>,
    /// Contract name whose events to watch.
    #[serde(default)]
    pub emitter: Option<String>,
    #[serde(default)]
    pub event: Option<String>,
    #[serde(default)]
    pub payload_eq: Payload,
    pub target: TargetSpec,
    #[serde(default = "default_one")]
    pub min_confirmations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub account: String,
    pub platform: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub deployer: String,
    #[serde(default)]
    pub routers: Vec<String>,
    #[serde(default)]
    pub processes: Vec<ProcessSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndpointKindSpec {
    Procedure {
        proc: String,
    },
    Webhook {
        url: String,
        method: String,
        proc: String,
    },
    Faas {
        platform: String,
        function: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub id: String,
    #[serde(flatten)]
    pub endpoint: EndpointKindSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub account: String,
    #[serde(default)]
    pub endpoints: Vec<EndpointSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeSpec {
    Simple(String),
    Await { await_durability: u64 },
}

impl Default for ModeSpec {
    fn default() -> ModeSpec {
        ModeSpec::Simple("fire_and_forget".into())
    }
}

impl ModeSpec {
    pub fn to_mode(&self) -> Result<InvocationMode, String> {
        match self {
            ModeSpec::Simple(s) if s == "fire_and_forget" => Ok(InvocationMode::FireAndForget),
            ModeSpec::Simple(s) => Err(format!("unknown invocation mode {s:?}")),
            ModeSpec::Await { await_durability } => Ok(InvocationMode::AwaitDurability {
                k: *await_durability,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    Call {
        sender: String,
        contract: String,
        function: String,
        #[serde(default)]
        args: Vec<Value>,
        max_fee: u64,
        #[serde(default)]
        mode: ModeSpec,
    },
    Publish {
        sender: String,
        platform: String,
        function: String,
        #[serde(default)]
        payload: Payload,
        #[serde(default = "default_publish_fee")]
        max_fee: u64,
    },
    FaasInvoke {
        platform: String,
        function: String,
        #[serde(default)]
        payload: Payload,
    },
    StartInstance {
        workflow: String,
        instance: String,
        #[serde(default)]
        inputs: BTreeMap<String, Value>,
        #[serde(default)]
        sender: Option<String>,
    },
}

/// A scheduled action: runs at tick `at`, then `repeat − 1` more times
/// spaced `every` ticks apart. Tick numbers count from 1 within the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub at: u64,
    #[serde(default = "default_one")]
    pub repeat: u64,
    #[serde(default = "default_one")]
    pub every: u64,
    pub action: ActionKind,
}

impl ActionSpec {
    pub fn fires_at(&self, step: u64) -> bool {
        if step < self.at || self.every == 0 {
            return false;
        }
        let offset = step - self.at;
        offset % self.every == 0 && offset / self.every < self.repeat
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub chain: ChainConfig,
    pub ticks: u64,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub platforms: Vec<PlatformSpec>,
    #[serde(default)]
    pub contracts: Vec<ContractSpec>,
    #[serde(default)]
    pub grants: Vec<GrantSpec>,
    #[serde(default)]
    pub workflows: Vec<WorkflowSpec>,
    #[serde(default)]
    pub subscriptions: Vec<SubscriptionSpec>,
    #[serde(default)]
    pub bus: Option<BusSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    /// Account the off-chain workflow engine signs with.
    #[serde(default)]
    pub engine_account: Option<String>,
    /// Whether the workflow engine is assumed to need its own chain
    /// account (conditions engine-related capability checks).
    #[serde(default = "default_true")]
    pub engine_accounts_required: bool,
    #[serde(default)]
    pub pricing: Pricing,
    #[serde(default)]
    pub actions: Vec<ActionSpec>,
}

/// Contract templates deployable from configuration.
pub fn contract_template(id: &str) -> Option<ContractDefinition> {
    match id {
        "counter" => Some(contract_templates::counter()),
        "oracle_client" => Some(contract_templates::oracle_client()),
        "bus" => Some(bus_contract()),
        _ => None,
    }
}

pub fn contract_template_ids() -> &'static [&'static str] {
    &["counter", "oracle_client", "bus"]
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration invalid: {}", format_findings(.0))]
    Invalid(Vec<Finding>),
    #[error("unknown reference: {0}")]
    Unknown(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Deploy(#[from] NodeDeployError),
    #[error(transparent)]
    Name(#[from] NameError),
    #[error(transparent)]
    Permission(#[from] PermissionError),
    #[error(transparent)]
    Submit(#[from] SubmitError),
    #[error(transparent)]
    Publish(#[from] PublishError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Start(#[from] StartError),
    #[error("action at tick {at}: {message}")]
    Action { at: u64, message: String },
}

fn format_findings(findings: &[Finding]) -> String {
    findings
        .iter()
        .filter(|f| f.level == FindingLevel::Error)
        .map(|f| f.message.clone())
        .collect::<Vec<_>>()
        .join("; ")
}

pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub sim: Simulation,
    pub accounts: BTreeMap<String, Address>,
    pub contracts: BTreeMap<String, Address>,
    /// Workflow name → (definition, mode).
    pub workflows: BTreeMap<String, (WorkflowDefinition, WorkflowMode)>,
    /// On-chain workflow name → compiled contract address.
    pub workflow_contracts: BTreeMap<String, Address>,
    /// `(workflow, instance)` pairs started so far.
    pub started: Vec<(String, String)>,
}

impl ScenarioRun {
    fn account(&self, name: &str) -> Result<Address, ScenarioError> {
        self.accounts
            .get(name)
            .cloned()
            .ok_or_else(|| ScenarioError::Unknown(format!("account {name:?}")))
    }

    /// Contract by declared name, `wf:<workflow>` alias, or literal address.
    fn contract(&self, name: &str) -> Result<Address, ScenarioError> {
        if let Some(addr) = self.contracts.get(name) {
            return Ok(addr.clone());
        }
        if let Some(wf) = name.strip_prefix("wf:") {
            if let Some(addr) = self.workflow_contracts.get(wf) {
                return Ok(addr.clone());
            }
        }
        if name.len() == 64 && name.chars().all(|c| c.is_ascii_hexdigit()) {
            return Ok(Digest(name.to_string()));
        }
        Err(ScenarioError::Unknown(format!("contract {name:?}")))
    }

    /// Runs the configured ticks, firing scheduled actions after each one.
    pub fn run(&mut self) -> Result<(), ScenarioError> {
        let actions = self.config.actions.clone();
        for step in 1..=self.config.ticks {
            self.sim.tick();
            for spec in &actions {
                if spec.fires_at(step) {
                    self.execute_action(step, &spec.action)?;
                }
            }
        }
        Ok(())
    }

    fn execute_action(&mut self, step: u64, action: &ActionKind) -> Result<(), ScenarioError> {
        let tick = self.sim.clock();
        match action {
            ActionKind::Call {
                sender,
                contract,
                function,
                args,
                max_fee,
                mode,
            } => {
                let sender = self.account(sender)?;
                let target = self.contract(contract)?;
                let mode = mode
                    .to_mode()
                    .map_err(|message| ScenarioError::Action { at: step, message })?;
                let tx = self.sim.gateway.invoke(
                    &mut self.sim.node,
                    &sender,
                    &target,
                    function,
                    args.clone(),
                    *max_fee,
                    mode,
                )?;
                self.sim.trace.record(
                    tick,
                    "action",
                    "script",
                    json!({"type": "call", "contract": contract, "function": function, "tx": tx.as_str()}),
                );
            }
            ActionKind::Publish {
                sender,
                platform,
                function,
                payload,
                max_fee,
            } => {
                let sender = self.account(sender)?;
                let bus = self.contract("bus")?;
                let tx = self.sim.gateway.publish(
                    &mut self.sim.node,
                    &sender,
                    &bus,
                    platform,
                    function,
                    payload,
                    *max_fee,
                )?;
                self.sim.trace.record(
                    tick,
                    "action",
                    "script",
                    json!({"type": "publish", "platform": platform, "function": function, "tx": tx.as_str()}),
                );
            }
            ActionKind::FaasInvoke {
                platform,
                function,
                payload,
            } => {
                let p = self
                    .sim
                    .platform_mut(platform)
                    .ok_or_else(|| ScenarioError::Unknown(format!("platform {platform:?}")))?;
                p.invoke_async(function, payload.clone());
                self.sim.trace.record(
                    tick,
                    "action",
                    "script",
                    json!({"type": "faas_invoke", "platform": platform, "function": function}),
                );
            }
            ActionKind::StartInstance {
                workflow,
                instance,
                inputs,
                sender,
            } => {
                let (def, mode) = self
                    .workflows
                    .get(workflow)
                    .cloned()
                    .ok_or_else(|| ScenarioError::Unknown(format!("workflow {workflow:?}")))?;
                match mode {
                    WorkflowMode::OffChain => {
                        let engine = self
                            .sim
                            .engine
                            .as_mut()
                            .ok_or_else(|| ScenarioError::Unknown("engine".into()))?;
                        engine.start_instance(workflow, instance, inputs.clone())?;
                    }
                    WorkflowMode::OnChain => {
                        let starter = match sender {
                            Some(name) => self.account(name)?,
                            None => {
                                let spec = self
                                    .config
                                    .workflows
                                    .iter()
                                    .find(|w| w.name == *workflow)
                                    .and_then(|w| w.deployer.clone())
                                    .ok_or_else(|| {
                                        ScenarioError::Unknown(format!(
                                            "starter for workflow {workflow:?}"
                                        ))
                                    })?;
                                self.account(&spec)?
                            }
                        };
                        let contract = self
                            .workflow_contracts
                            .get(workflow)
                            .cloned()
                            .ok_or_else(|| {
                                ScenarioError::Unknown(format!("workflow contract {workflow:?}"))
                            })?;
                        start_onchain_instance(
                            &mut self.sim.gateway,
                            &mut self.sim.node,
                            &starter,
                            &contract,
                            &def,
                            instance,
                            inputs,
                        )?;
                    }
                }
                self.started.push((workflow.clone(), instance.to_string()));
                self.sim.trace.record(
                    tick,
                    "action",
                    "script",
                    json!({"type": "start_instance", "workflow": workflow, "instance": instance}),
                );
            }
        }
        Ok(())
    }

    /// Current status per started instance, uniformly across both modes.
    pub fn instance_statuses(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (workflow, instance) in &self.started {
            let Some((def, mode)) = self.workflows.get(workflow) else {
                continue;
            };
            let status = match mode {
                WorkflowMode::OffChain => match self.sim.engine.as_ref().and_then(|e| e.instance(instance)) {
                    Some(inst) => match &inst.status {
                        InstanceStatus::Running => "running".to_string(),
                        InstanceStatus::Completed => "completed".to_string(),
                        InstanceStatus::Failed { reason } => format!("failed: {reason}"),
                    },
                    None => "unknown".to_string(),
                },
                WorkflowMode::OnChain => {
                    let Some(addr) = self.workflow_contracts.get(workflow) else {
                        continue;
                    };
                    match onchain_instance_state(&self.sim.node, addr, def, instance) {
                        OnChainInstanceState::NotStarted => "not_started".to_string(),
                        OnChainInstanceState::Running { pending_step } => {
                            format!("running: step {pending_step}")
                        }
                        OnChainInstanceState::Completed => "completed".to_string(),
                        OnChainInstanceState::Failed { reason } => format!("failed: {reason}"),
                    }
                }
            };
            out.insert(instance.clone(), status);
        }
        out
    }

    /// End-of-run summary.
    pub fn report(&self) -> serde_json::Value {
        let node = &self.sim.node;
        let dropped: usize = self
            .sim
            .trace
            .of_kind("block")
            .filter_map(|e| e.detail.get("dropped").and_then(|d| d.as_array()))
            .map(|d| d.len())
            .sum();
        let bus_deliveries: usize = self.sim.routers.iter().map(|r| r.delivery_log().len()).sum();
        let dead_letters: usize = self.sim.routers.iter().map(|r| r.dead_letters().len()).sum();
        let balances: BTreeMap<&String, u64> = self
            .accounts
            .iter()
            .map(|(name, addr)| (name, node.balance(addr)))
            .collect();
        json!({
            "id": self.config.id,
            "kind": self.config.kind.id(),
            "ticks": self.config.ticks,
            "chain_height": node.tip_height(),
            "reorgs": node.reorg_log().len(),
            "dropped_transactions": dropped,
            "fees_charged": self.sim.total_fees_charged(),
            "billed_units": self.sim.total_billed_units(),
            "deliveries": self.sim.gateway.delivery_log().len(),
            "durable_calls": self.sim.gateway.durable_log().len(),
            "bus_deliveries": bus_deliveries,
            "dead_letters": dead_letters,
            "instances": self.instance_statuses(),
            "balances": balances,
            "trace_entries": self.sim.trace.len(),
        })
    }
}

/// Builds the simulation a config describes: creates accounts and
/// platforms, deploys contracts and compiled workflows, then seals the
/// setup transactions so the run starts from a live chain tip.
pub fn build_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let findings = validate::validate_config(config);
    if findings.iter().any(|f| f.level == FindingLevel::Error) {
        return Err(ScenarioError::Invalid(findings));
    }

    let mut sim = Simulation::new(config.chain.clone());
    let mut accounts = BTreeMap::new();
    let mut contracts = BTreeMap::new();
    let mut workflows = BTreeMap::new();
    let mut workflow_contracts = BTreeMap::new();

    for spec in &config.accounts {
        let addr = sim.node.create_account(&spec.name)?;
        if spec.fund > 0 {
            sim.node.fund_account(&addr, spec.fund)?;
        }
        accounts.insert(spec.name.clone(), addr);
    }

    for spec in &config.platforms {
        let mut platform = FaasPlatform::new(&spec.id);
        platform.native_integration = spec.native_integration;
        for f in &spec.functions {
            let handler = catalog::handler(&f.handler)
                .ok_or_else(|| ScenarioError::Unknown(format!("handler {:?}", f.handler)))?;
            platform.register_function(&f.name, handler, f.max_duration, f.timer_period);
        }
        sim.add_platform(platform);
    }

    let account_of = |accounts: &BTreeMap<String, Address>,
                      name: &str|
     -> Result<Address, ScenarioError> {
        accounts
            .get(name)
            .cloned()
            .ok_or_else(|| ScenarioError::Unknown(format!("account {name:?}")))
    };

    for spec in &config.contracts {
        let def = contract_template(&spec.template)
            .ok_or_else(|| ScenarioError::Unknown(format!("template {:?}", spec.template)))?;
        let deployer = account_of(&accounts, &spec.deployer)?;
        let addr = sim.node.deploy_contract(def, &deployer)?;
        if spec.register {
            sim.node.register_name(&deployer, &spec.name, &addr)?;
        }
        contracts.insert(spec.name.clone(), addr);
    }

    for spec in &config.grants {
        let contract_spec = config
            .contracts
            .iter()
            .find(|c| c.name == spec.contract)
            .ok_or_else(|| ScenarioError::Unknown(format!("contract {:?}", spec.contract)))?;
        let grantor = account_of(&accounts, &contract_spec.deployer)?;
        let grantee = account_of(&accounts, &spec.grantee)?;
        let addr = contracts
            .get(&spec.contract)
            .cloned()
            .expect("declared contract was deployed");
        sim.node
            .set_permission(&grantor, &grantee, &addr, &spec.function, true)?;
    }

    if let Some(oracle) = &config.oracle {
        let account = account_of(&accounts, &oracle.account)?;
        sim.gateway.configure_oracle(account);
        for e in &oracle.endpoints {
            let endpoint = match &e.endpoint {
                EndpointKindSpec::Procedure { proc } => OracleEndpoint::Procedure {
                    proc: proc.clone(),
                },
                EndpointKindSpec::Webhook { url, method, proc } => OracleEndpoint::Webhook {
                    url: url.clone(),
                    method: method.clone(),
                    proc: proc.clone(),
                },
                EndpointKindSpec::Faas { platform, function } => OracleEndpoint::Faas {
                    platform: platform.clone(),
                    function: function.clone(),
                },
            };
            sim.gateway.register_endpoint(&e.id, endpoint);
        }
    }

    for spec in &config.workflows {
        let def = spec
            .resolve_definition()
            .ok_or_else(|| ScenarioError::Unknown(format!("workflow definition {:?}", spec.name)))?;
        match spec.mode {
            WorkflowMode::OffChain => {
                if sim.engine.is_none() {
                    let name = config
                        .engine_account
                        .as_deref()
                        .ok_or_else(|| ScenarioError::Unknown("engine account".into()))?;
                    let account = account_of(&accounts, name)?;
                    sim.engine = Some(OffChainEngine::new(account));
                }
                sim.engine
                    .as_mut()
                    .expect("engine just ensured")
                    .register_workflow(def.clone());
            }
            WorkflowMode::OnChain => {
                let deployer_name = spec
                    .deployer
                    .as_deref()
                    .ok_or_else(|| ScenarioError::Unknown(format!("deployer for {:?}", spec.name)))?;
                let deployer = account_of(&accounts, deployer_name)?;
                let compiled = compile_workflow(&def)?;
                let addr = sim.node.deploy_contract(compiled, &deployer)?;
                let oracle_account = config
                    .oracle
                    .as_ref()
                    .map(|o| account_of(&accounts, &o.account))
                    .transpose()?
                    .ok_or_else(|| ScenarioError::Unknown("oracle (required for on-chain workflows)".into()))?;
                sim.node
                    .set_permission(&deployer, &oracle_account, &addr, "advance", true)?;
                workflow_contracts.insert(spec.name.clone(), addr);
            }
        }
        workflows.insert(spec.name.clone(), (def, spec.mode));
    }

    if let Some(bus) = &config.bus {
        let deployer = account_of(&accounts, &bus.deployer)?;
        let addr = sim.node.deploy_contract(bus_contract(), &deployer)?;
        contracts.insert("bus".to_string(), addr);
        for platform in &bus.routers {
            sim.routers
                .push(MessageRouter::for_chain(platform, &config.chain));
        }
        for process in &bus.processes {
            let account = account_of(&accounts, &process.account)?;
            sim.directory.register(&account, &process.platform);
        }
    }

    // Seal setup transactions (deploys, registrations) into the chain.
    let mut sealing = 0;
    while sim.node.mempool_len() > 0 && sealing < 64 {
        sim.tick();
        sealing += 1;
    }

    for spec in &config.subscriptions {
        let mut filter = EventFilter::default();
        filter.kind = spec.kind;
        filter.name = spec.event.clone();
        filter.payload_eq = spec.payload_eq.clone();
        if let Some(emitter) = &spec.emitter {
            let addr = contracts
                .get(emitter)
                .cloned()
                .ok_or_else(|| ScenarioError::Unknown(format!("contract {emitter:?}")))?;
            filter.emitter = Some(addr.to_string());
        }
        let target = match &spec.target {
            TargetSpec::Function { platform, function } => DeliveryTarget::Function {
                platform: platform.clone(),
                function: function.clone(),
            },
            TargetSpec::Queue(_) => DeliveryTarget::Queue,
        };
        sim.gateway
            .subscribe(&sim.node, filter, target, spec.min_confirmations);
    }

    Ok(ScenarioRun {
        config: config.clone(),
        sim,
        accounts,
        contracts,
        workflows,
        workflow_contracts,
        started: Vec::new(),
    })
}

/// Builds and runs a scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let mut run = build_scenario(config)?;
    run.run()?;
    Ok(run)
}

/// Steps of every workflow in a config, used by validation and reporting.
pub(crate) fn workflow_steps(config: &ScenarioConfig) -> Vec<(&WorkflowSpec, WorkflowDefinition)> {
    config
        .workflows
        .iter()
        .filter_map(|spec| spec.resolve_definition().map(|def| (spec, def)))
        .collect()
}

pub(crate) fn has_event_wait(def: &WorkflowDefinition) -> bool {
    def.steps
        .iter()
        .any(|s| matches!(s, WorkflowStep::EventWait { .. }))
}
