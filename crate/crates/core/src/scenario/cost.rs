//! Cost accounting: chain fees vs. function billing, in a common currency.
//!
//! The chain side accumulates fee units (execution steps × gas price) per
//! transaction; the platform side accumulates billed duration units per
//! invocation. A [`Pricing`] converts both to dollars so a scenario can
//! report the cost ratio between running logic on chain and running it as
//! functions.

use super::ScenarioRun;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conversion rates between internal cost units and dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pricing {
    /// Dollar price of one coin of the chain's currency.
    pub ether_usd: f64,
    /// Coins charged per execution fee unit.
    pub fee_unit_ether: f64,
    /// Dollar price of one billed duration unit on a function platform.
    pub faas_cost_unit_usd: f64,
}

impl Default for Pricing {
    fn default() -> Pricing {
        Pricing {
            ether_usd: 300.0,
            fee_unit_ether: 1e-5,
            faas_cost_unit_usd: 3e-5,
        }
    }
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("scenario produced no costs to report")]
    EmptyTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub scenario: String,
    pub kind: String,
    /// Total execution fee units charged across all accounts.
    pub fee_units: u64,
    pub chain_cost_usd: f64,
    /// Total billed duration units across all function platforms.
    pub billed_units: u64,
    pub faas_cost_usd: f64,
    /// How many times more expensive the chain side was, when both sides
    /// incurred cost.
    pub ratio_chain_to_faas: Option<f64>,
    pub pricing: Pricing,
}

pub fn cost_report(run: &ScenarioRun) -> Result<CostReport, CostError> {
    let fee_units = run.sim.total_fees_charged();
    let billed_units = run.sim.total_billed_units();
    if fee_units == 0 && billed_units == 0 {
        return Err(CostError::EmptyTrace);
    }
    let pricing = run.config.pricing;
    let chain_cost_usd = fee_units as f64 * pricing.fee_unit_ether * pricing.ether_usd;
    let faas_cost_usd = billed_units as f64 * pricing.faas_cost_unit_usd;
    let ratio_chain_to_faas = if faas_cost_usd > 0.0 {
        Some(chain_cost_usd / faas_cost_usd)
    } else {
        None
    };
    Ok(CostReport {
        scenario: run.config.id.clone(),
        kind: run.config.kind.id().to_string(),
        fee_units,
        chain_cost_usd,
        billed_units,
        faas_cost_usd,
        ratio_chain_to_faas,
        pricing,
    })
}
