//! Configuration validation: structure first, then capability conditions.
//!
//! Structural checks catch dangling references and impossible parameters —
//! anything that would make a build fail. Capability checks walk the
//! requirement matrix column for the config's scenario kind: each supported
//! cell either applies (its footnote conditions hold, so a concrete check
//! runs against the config) or is reported as waived. Checks that fail
//! produce `Error` findings; softer observations surface as `Warning` or
//! `Info`.

use super::matrix::required_capabilities;
use super::{
    contract_template, has_event_wait, workflow_steps, ActionKind, ModeSpec, ScenarioConfig,
    TargetSpec, WorkflowMode,
};
use crate::faas::catalog;
use crate::gateway::procs;
use crate::orchestration::{
    compile::compile_workflow, validate_workflow, WorkflowEnv, WorkflowStep,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingLevel {
    Ok,
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub level: FindingLevel,
    /// Requirement id for capability findings, absent for structural ones.
    pub requirement: Option<String>,
    pub message: String,
}

impl Finding {
    fn structural(level: FindingLevel, message: impl Into<String>) -> Finding {
        Finding {
            level,
            requirement: None,
            message: message.into(),
        }
    }

    fn capability(level: FindingLevel, requirement: &str, message: impl Into<String>) -> Finding {
        Finding {
            level,
            requirement: Some(requirement.to_string()),
            message: message.into(),
        }
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.level == FindingLevel::Error)
}

pub fn validate_config(config: &ScenarioConfig) -> Vec<Finding> {
    let mut findings = structural(config);
    if !has_errors(&findings) {
        findings.extend(capabilities(config));
    }
    findings
}

struct Names {
    accounts: BTreeSet<String>,
    platforms: BTreeSet<String>,
    functions: BTreeSet<(String, String)>,
    contracts: BTreeSet<String>,
    registered_contracts: BTreeSet<String>,
    workflows: BTreeMap<String, WorkflowMode>,
}

impl Names {
    fn collect(config: &ScenarioConfig) -> Names {
        Names {
            accounts: config.accounts.iter().map(|a| a.name.clone()).collect(),
            platforms: config.platforms.iter().map(|p| p.id.clone()).collect(),
            functions: config
                .platforms
                .iter()
                .flat_map(|p| {
                    p.functions
                        .iter()
                        .map(|f| (p.id.clone(), f.name.clone()))
                })
                .collect(),
            contracts: config.contracts.iter().map(|c| c.name.clone()).collect(),
            registered_contracts: config
                .contracts
                .iter()
                .filter(|c| c.register)
                .map(|c| c.name.clone())
                .collect(),
            workflows: config
                .workflows
                .iter()
                .map(|w| (w.name.clone(), w.mode))
                .collect(),
        }
    }

    fn contract_known(&self, name: &str) -> bool {
        if self.contracts.contains(name) {
            return true;
        }
        if let Some(wf) = name.strip_prefix("wf:") {
            return self.workflows.get(wf) == Some(&WorkflowMode::OnChain);
        }
        name.len() == 64 && name.chars().all(|c| c.is_ascii_hexdigit())
    }
}

fn structural(config: &ScenarioConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut err = |message: String| {
        out.push(Finding::structural(FindingLevel::Error, message));
    };

    if config.ticks == 0 {
        err("ticks must be at least 1".into());
    }
    let chain = &config.chain;
    if !chain.fork_probability.is_finite() || !(0.0..=1.0).contains(&chain.fork_probability) {
        err(format!(
            "fork_probability {} is outside [0, 1]",
            chain.fork_probability
        ));
    }
    if chain.fork_probability > 0.0 && chain.max_reorg_depth == 0 {
        err("forks are possible but max_reorg_depth is 0".into());
    }
    if chain.block_capacity == 0 {
        err("block_capacity must be at least 1".into());
    }

    let names = Names::collect(config);
    for (label, declared, unique) in [
        ("account", config.accounts.len(), names.accounts.len()),
        ("platform", config.platforms.len(), names.platforms.len()),
        ("contract", config.contracts.len(), names.contracts.len()),
        ("workflow", config.workflows.len(), names.workflows.len()),
    ] {
        if declared != unique {
            err(format!("duplicate {label} names"));
        }
    }

    for platform in &config.platforms {
        for f in &platform.functions {
            if catalog::handler(&f.handler).is_none() {
                err(format!(
                    "platform {:?} function {:?}: unknown handler {:?}",
                    platform.id, f.name, f.handler
                ));
            }
            if f.max_duration == 0 {
                err(format!(
                    "platform {:?} function {:?}: max_duration must be at least 1",
                    platform.id, f.name
                ));
            }
        }
    }

    for contract in &config.contracts {
        if contract_template(&contract.template).is_none() {
            err(format!(
                "contract {:?}: unknown template {:?}",
                contract.name, contract.template
            ));
        }
        if !names.accounts.contains(&contract.deployer) {
            err(format!(
                "contract {:?}: unknown deployer {:?}",
                contract.name, contract.deployer
            ));
        }
    }

    for grant in &config.grants {
        if !names.accounts.contains(&grant.grantee) {
            err(format!("grant: unknown grantee {:?}", grant.grantee));
        }
        match config.contracts.iter().find(|c| c.name == grant.contract) {
            None => err(format!("grant: unknown contract {:?}", grant.contract)),
            Some(spec) => {
                if let Some(def) = contract_template(&spec.template) {
                    if !def.functions.contains_key(&grant.function) {
                        err(format!(
                            "grant: contract {:?} has no function {:?}",
                            grant.contract, grant.function
                        ));
                    }
                }
            }
        }
    }

    let env = WorkflowEnv {
        functions: names.functions.clone(),
        contracts: names.contracts.clone(),
    };
    for spec in &config.workflows {
        let def = match (&spec.template, &spec.definition) {
            (Some(_), Some(_)) | (None, None) => {
                err(format!(
                    "workflow {:?}: declare exactly one of template or definition",
                    spec.name
                ));
                continue;
            }
            _ => match spec.resolve_definition() {
                Some(def) => def,
                None => {
                    err(format!(
                        "workflow {:?}: unknown template {:?}",
                        spec.name,
                        spec.template.as_deref().unwrap_or("")
                    ));
                    continue;
                }
            },
        };
        if def.id != spec.name {
            err(format!(
                "workflow {:?}: definition id {:?} must match the declared name",
                spec.name, def.id
            ));
        }
        if let Err(e) = validate_workflow(&def, &env) {
            err(format!("workflow {:?}: {e}", spec.name));
        }
        for step in &def.steps {
            if let WorkflowStep::ContractCall { contract, .. } = step {
                if !names.registered_contracts.contains(contract) {
                    err(format!(
                        "workflow {:?}: step resolves contract {contract:?} by name, \
                         so that contract must be declared with register: true",
                        spec.name
                    ));
                }
            }
        }
    }

    let offchain = config
        .workflows
        .iter()
        .any(|w| w.mode == WorkflowMode::OffChain);
    let onchain = config
        .workflows
        .iter()
        .any(|w| w.mode == WorkflowMode::OnChain);
    if offchain {
        match &config.engine_account {
            None => err("off-chain workflows need engine_account".into()),
            Some(name) if !names.accounts.contains(name) => {
                err(format!("engine_account {name:?} is not a declared account"));
            }
            _ => {}
        }
    }
    if onchain {
        if config.oracle.is_none() {
            err("on-chain workflows need an oracle (callback relay) configured".into());
        }
        for spec in config
            .workflows
            .iter()
            .filter(|w| w.mode == WorkflowMode::OnChain)
        {
            match &spec.deployer {
                None => err(format!("workflow {:?}: on-chain mode needs a deployer", spec.name)),
                Some(name) if !names.accounts.contains(name) => {
                    err(format!("workflow {:?}: unknown deployer {name:?}", spec.name));
                }
                _ => {}
            }
            if let Some(def) = spec.resolve_definition() {
                if let Err(e) = compile_workflow(&def) {
                    err(format!("workflow {:?} does not compile: {e}", spec.name));
                }
            }
        }
    }

    if let Some(oracle) = &config.oracle {
        if !names.accounts.contains(&oracle.account) {
            err(format!("oracle account {:?} is not declared", oracle.account));
        }
        let mut seen = BTreeSet::new();
        for e in &oracle.endpoints {
            if !seen.insert(&e.id) {
                err(format!("duplicate endpoint id {:?}", e.id));
            }
            match &e.endpoint {
                super::EndpointKindSpec::Procedure { proc }
                | super::EndpointKindSpec::Webhook { proc, .. } => {
                    if !procs::known_ids().contains(&proc.as_str()) {
                        err(format!("endpoint {:?}: unknown procedure {proc:?}", e.id));
                    }
                }
                super::EndpointKindSpec::Faas { platform, function } => {
                    if !names
                        .functions
                        .contains(&(platform.clone(), function.clone()))
                    {
                        err(format!(
                            "endpoint {:?}: unknown function {platform}/{function}",
                            e.id
                        ));
                    }
                }
            }
        }
    }

    for (i, sub) in config.subscriptions.iter().enumerate() {
        if let Some(emitter) = &sub.emitter {
            if !names.contracts.contains(emitter) {
                err(format!("subscription {i}: unknown emitter contract {emitter:?}"));
            }
        }
        match &sub.target {
            TargetSpec::Function { platform, function } => {
                if !names
                    .functions
                    .contains(&(platform.clone(), function.clone()))
                {
                    err(format!(
                        "subscription {i}: unknown target {platform}/{function}"
                    ));
                }
            }
            TargetSpec::Queue(tag) => {
                if tag != "queue" {
                    err(format!("subscription {i}: unknown target {tag:?}"));
                }
            }
        }
    }

    if let Some(bus) = &config.bus {
        if !names.accounts.contains(&bus.deployer) {
            err(format!("bus deployer {:?} is not declared", bus.deployer));
        }
        let mut seen = BTreeSet::new();
        for platform in &bus.routers {
            if !names.platforms.contains(platform) {
                err(format!("bus router for unknown platform {platform:?}"));
            }
            if !seen.insert(platform) {
                err(format!("duplicate bus router for platform {platform:?}"));
            }
        }
        for process in &bus.processes {
            if !names.accounts.contains(&process.account) {
                err(format!("bus process: unknown account {:?}", process.account));
            }
            if !names.platforms.contains(&process.platform) {
                err(format!(
                    "bus process: unknown platform {:?}",
                    process.platform
                ));
            }
        }
    }

    for (i, spec) in config.actions.iter().enumerate() {
        if spec.at == 0 {
            err(format!("action {i}: at must be at least 1"));
        }
        if spec.repeat == 0 || spec.every == 0 {
            err(format!("action {i}: repeat and every must be at least 1"));
        } else if spec.at + spec.every * (spec.repeat - 1) > config.ticks {
            warnings.push(Finding::structural(
                FindingLevel::Warning,
                format!("action {i}: schedule extends past the configured ticks"),
            ));
        }
        match &spec.action {
            ActionKind::Call {
                sender,
                contract,
                function: _,
                args: _,
                max_fee,
                mode,
            } => {
                if !names.accounts.contains(sender) {
                    err(format!("action {i}: unknown sender {sender:?}"));
                }
                if !names.contract_known(contract) {
                    err(format!("action {i}: unknown contract {contract:?}"));
                }
                if *max_fee == 0 {
                    err(format!("action {i}: max_fee must be at least 1"));
                }
                if let Err(e) = mode.to_mode() {
                    err(format!("action {i}: {e}"));
                }
                if let ModeSpec::Await { await_durability } = mode {
                    if *await_durability == 0 {
                        err(format!("action {i}: await_durability must be at least 1"));
                    }
                }
            }
            ActionKind::Publish {
                sender,
                platform,
                function,
                ..
            } => {
                if !names.accounts.contains(sender) {
                    err(format!("action {i}: unknown sender {sender:?}"));
                }
                if config.bus.is_none() {
                    err(format!("action {i}: publish requires a bus section"));
                }
                if !names
                    .functions
                    .contains(&(platform.clone(), function.clone()))
                {
                    err(format!(
                        "action {i}: unknown publish target {platform}/{function}"
                    ));
                } else if config
                    .bus
                    .as_ref()
                    .map(|b| !b.routers.contains(platform))
                    .unwrap_or(false)
                {
                    warnings.push(Finding::structural(
                        FindingLevel::Warning,
                        format!("action {i}: platform {platform:?} has no bus router; the message will never be delivered"),
                    ));
                }
            }
            ActionKind::FaasInvoke {
                platform, function, ..
            } => {
                if !names
                    .functions
                    .contains(&(platform.clone(), function.clone()))
                {
                    err(format!("action {i}: unknown function {platform}/{function}"));
                }
            }
            ActionKind::StartInstance {
                workflow,
                inputs,
                sender,
                ..
            } => {
                match names.workflows.get(workflow) {
                    None => err(format!("action {i}: unknown workflow {workflow:?}")),
                    Some(_) => {
                        if let Some(spec) = config.workflows.iter().find(|w| w.name == *workflow) {
                            if let Some(def) = spec.resolve_definition() {
                                let declared: BTreeSet<_> = def.inputs.iter().collect();
                                let given: BTreeSet<_> = inputs.keys().collect();
                                if declared != given {
                                    err(format!(
                                        "action {i}: workflow {workflow:?} takes inputs {declared:?}, got {given:?}"
                                    ));
                                }
                            }
                        }
                    }
                }
                if let Some(name) = sender {
                    if !names.accounts.contains(name) {
                        err(format!("action {i}: unknown sender {name:?}"));
                    }
                }
            }
        }
    }

    drop(err);
    out.extend(warnings);
    out
}

/// Whether a footnote's condition holds for this configuration. `None`
/// means the note is informational rather than gating.
fn note_condition(config: &ScenarioConfig, note: u8) -> Option<bool> {
    match note {
        1 => Some(config.chain.reads_require_auth),
        2 => Some(config.engine_accounts_required),
        3 => Some(config.chain.gas_price > 0),
        4 => None,
        5 => Some(!config.subscriptions.is_empty()),
        6 => Some(config.platforms.iter().any(|p| !p.native_integration)),
        _ => Some(true),
    }
}

fn capabilities(config: &ScenarioConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let matrix = super::matrix::requirement_matrix();
    for (req, cell) in required_capabilities(config.kind) {
        let mut waived = None;
        for note in &cell.notes {
            if note_condition(config, *note) == Some(false) {
                waived = Some(*note);
                break;
            }
        }
        if let Some(note) = waived {
            let text = matrix
                .footnotes
                .get(&note.to_string())
                .cloned()
                .unwrap_or_default();
            out.push(Finding::capability(
                FindingLevel::Info,
                &req.id,
                format!("{}: waived for this configuration ({text})", req.title),
            ));
            continue;
        }
        out.push(check_requirement(config, &req.id, &req.title, &cell.notes));
    }
    out
}

fn check_requirement(
    config: &ScenarioConfig,
    id: &str,
    title: &str,
    notes: &[u8],
) -> Finding {
    let steps = workflow_steps(config);
    match id {
        "A-1" => Finding::capability(
            FindingLevel::Ok,
            id,
            format!("{title}: the node is provisioned with the run and billed per transaction"),
        ),
        "A-2" => {
            if config.accounts.is_empty() {
                Finding::capability(FindingLevel::Error, id, format!("{title}: no accounts declared"))
            } else {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: {} account(s) declared", config.accounts.len()),
                )
            }
        }
        "A-3" => {
            let unfunded = spending_accounts(config)
                .into_iter()
                .filter(|name| {
                    config
                        .accounts
                        .iter()
                        .find(|a| a.name == *name)
                        .map(|a| a.fund == 0)
                        .unwrap_or(false)
                })
                .collect::<Vec<_>>();
            if unfunded.is_empty() {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: all transaction senders are funded"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: accounts {unfunded:?} send transactions but hold no funds"),
                )
            }
        }
        "A-4" => {
            let level = if notes.contains(&4) {
                FindingLevel::Info
            } else {
                FindingLevel::Ok
            };
            Finding::capability(
                level,
                id,
                format!("{title}: chain export and integrity checks support replication to external nodes"),
            )
        }
        "B-1" => {
            let offchain_engine = config
                .workflows
                .iter()
                .any(|w| w.mode == WorkflowMode::OffChain);
            let channels = config.subscriptions.len()
                + config.bus.as_ref().map(|b| b.routers.len()).unwrap_or(0)
                + steps.iter().filter(|(_, def)| has_event_wait(def)).count()
                + usize::from(config.oracle.is_some())
                + usize::from(offchain_engine);
            if channels > 0 {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: {channels} event consumption channel(s) configured"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: nothing consumes chain events"),
                )
            }
        }
        "B-2" => {
            let calls = config
                .actions
                .iter()
                .filter(|a| {
                    matches!(
                        a.action,
                        ActionKind::Call { .. }
                            | ActionKind::Publish { .. }
                            | ActionKind::StartInstance { .. }
                    )
                })
                .count()
                + steps
                    .iter()
                    .flat_map(|(_, def)| &def.steps)
                    .filter(|s| matches!(s, WorkflowStep::ContractCall { .. }))
                    .count();
            if calls > 0 {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: contract invocations are configured"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: nothing invokes a contract"),
                )
            }
        }
        "B-3" => {
            let mut max_k = None::<u64>;
            for action in &config.actions {
                if let ActionKind::Call {
                    mode: ModeSpec::Await { await_durability },
                    ..
                } = &action.action
                {
                    max_k = Some(max_k.unwrap_or(0).max(*await_durability));
                }
            }
            for (_, def) in &steps {
                for step in &def.steps {
                    if let WorkflowStep::ContractCall { durability_k, .. } = step {
                        max_k = Some(max_k.unwrap_or(0).max(*durability_k));
                    }
                }
            }
            let r = config.chain.max_reorg_depth;
            match max_k {
                None => Finding::capability(
                    FindingLevel::Warning,
                    id,
                    format!("{title}: no calls await durability"),
                ),
                Some(k) if k > r => Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: calls await depth {k}, beyond the maximum reorganization depth {r}"),
                ),
                Some(k) => Finding::capability(
                    FindingLevel::Warning,
                    id,
                    format!("{title}: awaited depth {k} does not exceed the maximum reorganization depth {r}; inclusion can still be rolled back"),
                ),
            }
        }
        "B-4" => {
            let onchain = config
                .workflows
                .iter()
                .any(|w| w.mode == WorkflowMode::OnChain);
            if onchain {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: on-chain workflows emit outbound call requests via the relay"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: no on-chain workflow initiates outbound communication"),
                )
            }
        }
        "C-1" => {
            if config.contracts.is_empty() && config.workflows.is_empty() {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: no contract artifacts declared"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: contract definitions are validated before deployment"),
                )
            }
        }
        "C-2" => {
            let deployed = !config.contracts.is_empty()
                || config
                    .workflows
                    .iter()
                    .any(|w| w.mode == WorkflowMode::OnChain);
            if deployed {
                Finding::capability(
                    FindingLevel::Ok,
                    id,
                    format!("{title}: contracts deploy declaratively from configuration"),
                )
            } else {
                Finding::capability(
                    FindingLevel::Error,
                    id,
                    format!("{title}: nothing is deployed from configuration"),
                )
            }
        }
        other => Finding::capability(
            FindingLevel::Warning,
            other,
            format!("{title}: no check implemented"),
        ),
    }
}

/// Account names that sign transactions somewhere in the config.
fn spending_accounts(config: &ScenarioConfig) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for contract in &config.contracts {
        out.insert(contract.deployer.clone());
    }
    for workflow in &config.workflows {
        if let Some(deployer) = &workflow.deployer {
            out.insert(deployer.clone());
        }
    }
    if let Some(name) = &config.engine_account {
        out.insert(name.clone());
    }
    if let Some(oracle) = &config.oracle {
        out.insert(oracle.account.clone());
    }
    if let Some(bus) = &config.bus {
        out.insert(bus.deployer.clone());
    }
    for action in &config.actions {
        match &action.action {
            ActionKind::Call { sender, .. } | ActionKind::Publish { sender, .. } => {
                out.insert(sender.clone());
            }
            ActionKind::StartInstance { sender, .. } => {
                if let Some(name) = sender {
                    out.insert(name.clone());
                }
            }
            ActionKind::FaasInvoke { .. } => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> ScenarioConfig {
        serde_json::from_value(json!({
            "id": "v",
            "kind": "S2_ContractAsFunction",
            "ticks": 20,
            "accounts": [{"name": "alice", "fund": 10000}],
            "platforms": [{"id": "p1", "functions": [{"name": "echo", "handler": "echo"}]}],
            "contracts": [{"name": "counter", "template": "counter", "deployer": "alice"}],
            "actions": [
                {"at": 1, "action": {"type": "call", "sender": "alice", "contract": "counter",
                 "function": "inc", "max_fee": 100, "mode": {"await_durability": 4}}}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn clean_config_has_no_errors() {
        let findings = validate_config(&base());
        assert!(!has_errors(&findings), "{findings:?}");
        assert!(findings
            .iter()
            .any(|f| f.requirement.as_deref() == Some("B-3") && f.level == FindingLevel::Ok));
    }

    #[test]
    fn unfunded_spender_is_an_error_when_gas_is_priced() {
        let mut config = base();
        config.accounts[0].fund = 0;
        let findings = validate_config(&config);
        assert!(findings
            .iter()
            .any(|f| f.requirement.as_deref() == Some("A-3") && f.level == FindingLevel::Error));
    }

    #[test]
    fn free_gas_waives_the_funding_requirement() {
        let mut config = base();
        config.accounts[0].fund = 0;
        config.chain.gas_price = 0;
        let findings = validate_config(&config);
        let a3: Vec<_> = findings
            .iter()
            .filter(|f| f.requirement.as_deref() == Some("A-3"))
            .collect();
        assert_eq!(a3.len(), 1);
        assert_eq!(a3[0].level, FindingLevel::Info);
        assert!(a3[0].message.contains("waived"));
    }

    #[test]
    fn shallow_awaits_warn() {
        let mut config = base();
        if let ActionKind::Call { mode, .. } = &mut config.actions[0].action {
            *mode = ModeSpec::Await {
                await_durability: 2,
            };
        }
        let findings = validate_config(&config);
        assert!(findings.iter().any(|f| f.requirement.as_deref() == Some("B-3")
            && f.level == FindingLevel::Warning
            && f.message.contains("does not exceed")));
    }

    #[test]
    fn structural_errors_are_caught() {
        let mut config = base();
        config.chain.fork_probability = 1.5;
        config.actions[0].at = 0;
        let findings = validate_config(&config);
        let errors: Vec<_> = findings
            .iter()
            .filter(|f| f.level == FindingLevel::Error)
            .collect();
        assert!(errors.iter().any(|f| f.message.contains("fork_probability")));
        assert!(errors.iter().any(|f| f.message.contains("at must be")));
    }
}
