//! Execution state folded over blocks.
//!
//! Everything here is replayable chain state: it is snapshotted after each
//! block and rolled back wholesale when a fork orphans blocks. External
//! funding intentionally lives outside (in the account registry) so that a
//! rollback never erases a funding operation; an account's spendable balance
//! is `funded - charged`.

use crate::canonical::{Digest};
use crate::identity::Address;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type Storage = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    /// Per-contract key-value storage.
    pub storages: BTreeMap<Address, Storage>,
    /// Cumulative fees charged per sender on the current chain.
    pub charged: BTreeMap<Address, u64>,
    /// Next expected transaction nonce per sender.
    pub nonces: BTreeMap<Address, u64>,
}

impl WorldState {
    pub fn digest(&self) -> Digest {
        Digest::of_value(self)
    }

    pub fn storage(&self, contract: &Address) -> Option<&Storage> {
        self.storages.get(contract)
    }

    pub fn storage_mut(&mut self, contract: &Address) -> &mut Storage {
        self.storages.entry(contract.clone()).or_default()
    }

    pub fn charged_of(&self, account: &Address) -> u64 {
        self.charged.get(account).copied().unwrap_or(0)
    }

    pub fn charge(&mut self, account: &Address, fee: u64) {
        if fee > 0 {
            *self.charged.entry(account.clone()).or_insert(0) += fee;
        }
    }

    pub fn nonce(&self, account: &Address) -> u64 {
        self.nonces.get(account).copied().unwrap_or(0)
    }

    pub fn bump_nonce(&mut self, account: &Address) {
        *self.nonces.entry(account.clone()).or_insert(0) += 1;
    }
}
