//! Workflow definitions and the two interchangeable ways to run them.
//!
//! A workflow is a short list of steps over named variables: call a hosted
//! function, call a contract, wait for a chain event, or branch on a
//! comparison. The same definition can be executed by the off-chain
//! [`engine::OffChainEngine`], which keeps instance state in memory and
//! talks to the chain through the gateway, or compiled by
//! [`compile::compile_workflow`] into a contract that keeps instance state
//! in contract storage and is driven forward one transaction per step.
//! Both runners scalarize step results the same way, so a finished instance
//! leaves an identical step-completion trace either way.

pub mod compile;
pub mod engine;

use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Where a step argument comes from: a workflow variable or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgSource {
    Var(String),
    Lit(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowStep {
    /// Invoke a hosted function with named arguments; assign the scalarized
    /// result.
    FunctionCall {
        platform: String,
        function: String,
        #[serde(default)]
        args: std::collections::BTreeMap<String, ArgSource>,
        assign: String,
        /// Explicit forward jump; defaults to the next step.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<usize>,
    },
    /// Invoke a contract (by registered name or address) and wait for the
    /// transaction to reach `durability_k` confirmations.
    ContractCall {
        contract: String,
        function: String,
        #[serde(default)]
        args: Vec<ArgSource>,
        assign: String,
        #[serde(default = "default_durability")]
        durability_k: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<usize>,
    },
    /// Block until a chain event with this name is delivered.
    EventWait {
        event: String,
        assign: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<usize>,
    },
    /// Two-way branch on a variable comparison. Records `"then"` or
    /// `"else"` as its own step value.
    Choice {
        var: String,
        op: CmpOp,
        value: Value,
        then_goto: usize,
        else_goto: usize,
        assign: String,
    },
}

fn default_durability() -> u64 {
    1
}

impl WorkflowStep {
    /// Variables this step reads.
    pub fn reads(&self) -> Vec<&str> {
        match self {
            WorkflowStep::FunctionCall { args, .. } => args
                .values()
                .filter_map(|a| match a {
                    ArgSource::Var(v) => Some(v.as_str()),
                    ArgSource::Lit(_) => None,
                })
                .collect(),
            WorkflowStep::ContractCall { args, .. } => args
                .iter()
                .filter_map(|a| match a {
                    ArgSource::Var(v) => Some(v.as_str()),
                    ArgSource::Lit(_) => None,
                })
                .collect(),
            WorkflowStep::EventWait { .. } => Vec::new(),
            WorkflowStep::Choice { var, .. } => vec![var.as_str()],
        }
    }

    pub fn assign(&self) -> &str {
        match self {
            WorkflowStep::FunctionCall { assign, .. }
            | WorkflowStep::ContractCall { assign, .. }
            | WorkflowStep::EventWait { assign, .. }
            | WorkflowStep::Choice { assign, .. } => assign,
        }
    }

    /// Step indices control can move to after this step at position `at`.
    /// `steps.len()` denotes completion.
    pub fn targets(&self, at: usize) -> Vec<usize> {
        match self {
            WorkflowStep::Choice {
                then_goto,
                else_goto,
                ..
            } => vec![*then_goto, *else_goto],
            WorkflowStep::FunctionCall { next, .. }
            | WorkflowStep::ContractCall { next, .. }
            | WorkflowStep::EventWait { next, .. } => vec![next.unwrap_or(at + 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDefinition {
    pub id: String,
    /// Input variable names, in the order `start` expects them.
    #[serde(default)]
    pub inputs: Vec<String>,
    pub steps: Vec<WorkflowStep>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkflowError {
    #[error("workflow has no steps")]
    Empty,
    #[error("step {step} jumps backward or beyond the end")]
    CyclicSteps { step: usize },
    #[error("step {step} reads variable {var} before anything assigns it")]
    UnboundVariable { step: usize, var: String },
    #[error("step {step} calls unknown function {platform}/{function}")]
    UnknownFunction {
        step: usize,
        platform: String,
        function: String,
    },
    #[error("step {step} calls unknown contract {name}")]
    UnknownContract { step: usize, name: String },
    #[error("step {step} passes variable arguments to a contract call, which only the in-memory runner supports")]
    UnsupportedVarArgs { step: usize },
}

/// What a workflow may reference when validated against an environment.
#[derive(Debug, Clone, Default)]
pub struct WorkflowEnv {
    /// `(platform, function)` pairs that exist.
    pub functions: BTreeSet<(String, String)>,
    /// Contract names and addresses that resolve.
    pub contracts: BTreeSet<String>,
}

/// Checks control flow and variable binding, independent of any deployment.
///
/// Control must only move forward (`CyclicSteps` otherwise), so every
/// instance terminates, and a step may only read inputs or variables
/// assigned by an earlier step.
pub fn validate_structure(def: &WorkflowDefinition) -> Result<(), WorkflowError> {
    if def.steps.is_empty() {
        return Err(WorkflowError::Empty);
    }
    let n = def.steps.len();
    let mut bound: BTreeSet<&str> = def.inputs.iter().map(String::as_str).collect();
    for (i, step) in def.steps.iter().enumerate() {
        for target in step.targets(i) {
            if target <= i || target > n {
                return Err(WorkflowError::CyclicSteps { step: i });
            }
        }
        for var in step.reads() {
            if !bound.contains(var) {
                return Err(WorkflowError::UnboundVariable {
                    step: i,
                    var: var.to_string(),
                });
            }
        }
        bound.insert(step.assign());
    }
    Ok(())
}

/// Structural validation plus existence checks against an environment.
pub fn validate_workflow(def: &WorkflowDefinition, env: &WorkflowEnv) -> Result<(), WorkflowError> {
    validate_structure(def)?;
    for (i, step) in def.steps.iter().enumerate() {
        match step {
            WorkflowStep::FunctionCall {
                platform, function, ..
            } => {
                if !env
                    .functions
                    .contains(&(platform.clone(), function.clone()))
                {
                    return Err(WorkflowError::UnknownFunction {
                        step: i,
                        platform: platform.clone(),
                        function: function.clone(),
                    });
                }
            }
            WorkflowStep::ContractCall { contract, .. } => {
                if !env.contracts.contains(contract) {
                    return Err(WorkflowError::UnknownContract {
                        step: i,
                        name: contract.clone(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub mod templates {
    //! Ready-made workflow definitions used by scenarios and tests.

    use super::*;
    use std::collections::BTreeMap;

    fn echo_step(value: ArgSource, assign: &str, next: Option<usize>) -> WorkflowStep {
        WorkflowStep::FunctionCall {
            platform: "p1".into(),
            function: "echo".into(),
            args: BTreeMap::from([("value".to_string(), value)]),
            assign: assign.into(),
            next,
        }
    }

    /// Echo the input, bump a counter on chain, echo the first result.
    pub fn wf_linear() -> WorkflowDefinition {
        WorkflowDefinition {
            id: "wf_linear".into(),
            inputs: vec!["x".into()],
            steps: vec![
                echo_step(ArgSource::Var("x".into()), "a", None),
                WorkflowStep::ContractCall {
                    contract: "counter".into(),
                    function: "inc".into(),
                    args: vec![],
                    assign: "b".into(),
                    durability_k: 1,
                    next: None,
                },
                echo_step(ArgSource::Var("a".into()), "c", None),
            ],
        }
    }

    /// Branch on the input: `v >= 10` echoes "big", otherwise "small".
    pub fn wf_choice() -> WorkflowDefinition {
        WorkflowDefinition {
            id: "wf_choice".into(),
            inputs: vec!["v".into()],
            steps: vec![
                echo_step(ArgSource::Var("v".into()), "a", None),
                WorkflowStep::Choice {
                    var: "v".into(),
                    op: CmpOp::Ge,
                    value: Value::Int(10),
                    then_goto: 2,
                    else_goto: 3,
                    assign: "branch".into(),
                },
                echo_step(ArgSource::Lit(Value::str("big")), "r", Some(4)),
                echo_step(ArgSource::Lit(Value::str("small")), "r", None),
            ],
        }
    }

    /// Echo, wait for a counter event, echo again.
    pub fn wf_wait() -> WorkflowDefinition {
        WorkflowDefinition {
            id: "wf_wait".into(),
            inputs: vec!["x".into()],
            steps: vec![
                echo_step(ArgSource::Var("x".into()), "a", None),
                WorkflowStep::EventWait {
                    event: "CountChanged".into(),
                    assign: "evt".into(),
                    next: None,
                },
                echo_step(ArgSource::Var("a".into()), "c", None),
            ],
        }
    }

    /// Hand work across two platforms: each step runs on a different one.
    pub fn wf_cross() -> WorkflowDefinition {
        WorkflowDefinition {
            id: "wf_cross".into(),
            inputs: vec!["x".into()],
            steps: vec![
                echo_step(ArgSource::Var("x".into()), "a", None),
                WorkflowStep::FunctionCall {
                    platform: "p2".into(),
                    function: "echo".into(),
                    args: BTreeMap::from([("value".to_string(), ArgSource::Var("a".into()))]),
                    assign: "b".into(),
                    next: None,
                },
            ],
        }
    }

    pub fn workflow(id: &str) -> Option<WorkflowDefinition> {
        match id {
            "wf_linear" => Some(wf_linear()),
            "wf_choice" => Some(wf_choice()),
            "wf_wait" => Some(wf_wait()),
            "wf_cross" => Some(wf_cross()),
            _ => None,
        }
    }

    pub fn known_ids() -> &'static [&'static str] {
        &["wf_linear", "wf_choice", "wf_wait", "wf_cross"]
    }
}
