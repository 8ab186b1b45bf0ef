//! Accounts, signatures, and permission grants.
//!
//! Signing is simulation grade: a signature is the SHA-256 digest of the
//! account's secret key concatenated with the canonical body bytes, and an
//! address is the digest of a public descriptor derived from that secret.
//! The registry holds the secrets, so verification re-derives the digest
//! instead of using asymmetric cryptography. The interface is shaped so a
//! real scheme could replace the keyed digest without touching callers.

use crate::canonical::Digest;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type Address = Digest;
pub type Signature = Digest;

/// Versioned tag mixed into key and address derivation.
const SCHEME_TAG: &str = "keyed-sha256-v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("an account with this address already exists")]
    DuplicateAddress,
    #[error("unknown account {0}")]
    UnknownAccount(Address),
}

#[derive(Debug, Clone)]
pub struct Account {
    pub address: Address,
    secret: String,
    /// Cumulative external funding. Never decreases; fees are tracked by the
    /// ledger so that chain rollbacks cannot erase funding operations.
    pub funded: u64,
    /// Grants of (contract address, function name) held by this account.
    pub grants: BTreeSet<(Address, String)>,
}

/// All known accounts, keyed by address.
#[derive(Debug, Clone, Default)]
pub struct AccountRegistry {
    accounts: BTreeMap<Address, Account>,
}

impl AccountRegistry {
    pub fn new() -> AccountRegistry {
        AccountRegistry::default()
    }

    /// Derives a fresh account from `seed`. The same seed always yields the
    /// same address, in this registry or any other.
    pub fn create_account(&mut self, seed: &str) -> Result<Address, IdentityError> {
        let secret = Digest::of_bytes(format!("{SCHEME_TAG}:secret:{seed}").as_bytes());
        let descriptor = format!("{SCHEME_TAG}:pub:{secret}");
        let address = Digest::of_bytes(descriptor.as_bytes());
        if self.accounts.contains_key(&address) {
            return Err(IdentityError::DuplicateAddress);
        }
        self.accounts.insert(
            address.clone(),
            Account {
                address: address.clone(),
                secret: secret.0,
                funded: 0,
                grants: BTreeSet::new(),
            },
        );
        Ok(address)
    }

    /// Credits `amount` to the account and returns its new funded total.
    pub fn fund_account(&mut self, address: &Address, amount: u64) -> Result<u64, IdentityError> {
        let account = self
            .accounts
            .get_mut(address)
            .ok_or_else(|| IdentityError::UnknownAccount(address.clone()))?;
        account.funded = account.funded.saturating_add(amount);
        Ok(account.funded)
    }

    pub fn funded(&self, address: &Address) -> u64 {
        self.accounts.get(address).map(|a| a.funded).unwrap_or(0)
    }

    pub fn contains(&self, address: &Address) -> bool {
        self.accounts.contains_key(address)
    }

    pub fn addresses(&self) -> impl Iterator<Item = &Address> {
        self.accounts.keys()
    }

    /// Signs canonical body bytes with the account's secret.
    pub fn sign(&self, address: &Address, body: &[u8]) -> Result<Signature, IdentityError> {
        let account = self
            .accounts
            .get(address)
            .ok_or_else(|| IdentityError::UnknownAccount(address.clone()))?;
        Ok(keyed_digest(&account.secret, body))
    }

    /// True when `signature` is the keyed digest of `body` under the
    /// account's secret. Unknown addresses verify as false.
    pub fn verify(&self, address: &Address, body: &[u8], signature: &Signature) -> bool {
        match self.accounts.get(address) {
            Some(account) => keyed_digest(&account.secret, body) == *signature,
            None => false,
        }
    }

    /// Records or removes a grant on (contract, function) for `grantee`.
    /// Deployer authority is enforced by the ledger, which knows who
    /// deployed each contract; this is the raw bookkeeping step.
    pub fn set_grant(
        &mut self,
        grantee: &Address,
        contract: &Address,
        function: &str,
        allow: bool,
    ) -> Result<(), IdentityError> {
        let account = self
            .accounts
            .get_mut(grantee)
            .ok_or_else(|| IdentityError::UnknownAccount(grantee.clone()))?;
        let key = (contract.clone(), function.to_string());
        if allow {
            account.grants.insert(key);
        } else {
            account.grants.remove(&key);
        }
        Ok(())
    }

    pub fn has_grant(&self, grantee: &Address, contract: &Address, function: &str) -> bool {
        self.accounts
            .get(grantee)
            .map(|a| a.grants.contains(&(contract.clone(), function.to_string())))
            .unwrap_or(false)
    }
}

fn keyed_digest(secret: &str, body: &[u8]) -> Signature {
    let mut preimage = Vec::with_capacity(secret.len() + 1 + body.len());
    preimage.extend_from_slice(secret.as_bytes());
    preimage.push(b':');
    preimage.extend_from_slice(body);
    Digest::of_bytes(&preimage)
}
