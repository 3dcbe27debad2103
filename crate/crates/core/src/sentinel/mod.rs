//! Proxy-level reentrancy guard. All guard state lives in hashed storage
//! slots of the proxy account; the high-security mode coordinates coupled
//! proxies through an external lock registry keyed by domain.

mod proxy;
mod registry;

use serde::{Deserialize, Serialize};

use crate::hash::keccak_word;
use crate::mcvm::{Account, Address, Word, WorldState};

pub use proxy::{
    SentinelProxy, REASON_HIGH_SECURITY, REASON_IMPLEMENTATION_UNSET, REASON_INVALID_MODE, REASON_NOT_ADMIN,
    REASON_OPTIMIZED, REASON_REGISTRY_UNSET, REASON_STATIC,
};
pub use registry::{
    registry_state, LockRegistry, LockRegistryState, REASON_DOMAIN_LOCKED, REASON_NOT_LOCKER, STATUS_FREE,
    STATUS_HELD,
};

/// Keccak-256 of the label bytes, read as a big-endian slot key.
pub fn derive_slot(label: &str) -> Word {
    keccak_word(label.as_bytes())
}

pub const LABEL_IMPLEMENTATION: &str = "sentinel.proxy.implementation";
pub const LABEL_MODE: &str = "sentinel.proxy.mode";
pub const LABEL_LOCK_STATUS: &str = "sentinel.proxy.lockStatus";
pub const LABEL_STATIC_CALL_ALLOWED: &str = "sentinel.proxy.staticCallAllowed";
pub const LABEL_LOCK_REGISTRY: &str = "sentinel.proxy.lockRegistry";
pub const LABEL_DOMAIN_ID: &str = "sentinel.proxy.domainId";
pub const LABEL_ADMIN: &str = "sentinel.proxy.admin";

pub const UNLOCKED: u64 = 1;
pub const LOCKED: u64 = 2;
pub const ALLOWED: u64 = 1;
pub const DISALLOWED: u64 = 2;

/// Topic count of the lock-activated log.
pub const LOCK_ACTIVATED_TOPICS: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardMode {
    Optimized,
    HighSecurity,
}

impl GuardMode {
    pub fn encode(self) -> Word {
        match self {
            GuardMode::Optimized => Word::one(),
            GuardMode::HighSecurity => Word::from(2),
        }
    }

    pub fn decode(w: Word) -> Option<Self> {
        match w.low_u64() {
            1 if w < Word::from(3) => Some(GuardMode::Optimized),
            2 if w < Word::from(3) => Some(GuardMode::HighSecurity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GuardMode::Optimized => "optimized",
            GuardMode::HighSecurity => "high-security",
        }
    }
}

impl std::str::FromStr for GuardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [GuardMode::Optimized, GuardMode::HighSecurity]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s}"))
    }
}

/// Slot keys of the proxy's dedicated storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProxyConfig {
    pub implementation_slot: Word,
    pub mode_slot: Word,
    pub lock_status_slot: Word,
    pub static_call_allowed_slot: Word,
    pub lock_registry_slot: Word,
    pub domain_id_slot: Word,
    pub admin_slot: Word,
}

impl ProxyConfig {
    pub fn canonical() -> Self {
        ProxyConfig {
            implementation_slot: derive_slot(LABEL_IMPLEMENTATION),
            mode_slot: derive_slot(LABEL_MODE),
            lock_status_slot: derive_slot(LABEL_LOCK_STATUS),
            static_call_allowed_slot: derive_slot(LABEL_STATIC_CALL_ALLOWED),
            lock_registry_slot: derive_slot(LABEL_LOCK_REGISTRY),
            domain_id_slot: derive_slot(LABEL_DOMAIN_ID),
            admin_slot: derive_slot(LABEL_ADMIN),
        }
    }

    pub fn slots(&self) -> [Word; 7] {
        [
            self.implementation_slot,
            self.mode_slot,
            self.lock_status_slot,
            self.static_call_allowed_slot,
            self.lock_registry_slot,
            self.domain_id_slot,
            self.admin_slot,
        ]
    }
}

/// Construction parameters of one proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyParams {
    pub implementation: Address,
    pub mode: GuardMode,
    pub registry: Address,
    pub domain: Word,
    pub admin: Address,
}

/// Decoded dedicated-slot contents of a deployed proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProxyState {
    pub implementation: Address,
    pub mode: Option<GuardMode>,
    pub lock_status: Word,
    pub static_call_allowed: Word,
    pub registry: Address,
    pub domain: Word,
    pub admin: Address,
}

/// Creates (or replaces) a proxy account with initialized guard slots.
pub fn install_proxy(world: &mut WorldState, at: Address, params: &ProxyParams, balance: Word) {
    let cfg = ProxyConfig::canonical();
    world.insert(at, Account::with_behavior(crate::behaviors::Behavior::SentinelProxy(SentinelProxy), balance));
    world.store(at, cfg.implementation_slot, params.implementation.to_word());
    world.store(at, cfg.mode_slot, params.mode.encode());
    world.store(at, cfg.lock_status_slot, Word::from(UNLOCKED));
    world.store(at, cfg.static_call_allowed_slot, Word::from(ALLOWED));
    world.store(at, cfg.lock_registry_slot, params.registry.to_word());
    world.store(at, cfg.domain_id_slot, params.domain);
    world.store(at, cfg.admin_slot, params.admin.to_word());
}

pub fn install_registry(world: &mut WorldState, at: Address) {
    world.insert(at, Account::with_behavior(crate::behaviors::Behavior::LockRegistry(LockRegistry), Word::zero()));
}

/// Initializes a domain's registry entry to free.
pub fn register_domain(world: &mut WorldState, registry: Address, domain: Word) {
    world.store(registry, registry::status_slot(domain), STATUS_FREE);
}

pub fn proxy_state(world: &WorldState, proxy: Address) -> ProxyState {
    let cfg = ProxyConfig::canonical();
    let load = |slot| world.load(proxy, slot);
    ProxyState {
        implementation: Address::from_word(load(cfg.implementation_slot)),
        mode: GuardMode::decode(load(cfg.mode_slot)),
        lock_status: load(cfg.lock_status_slot),
        static_call_allowed: load(cfg.static_call_allowed_slot),
        registry: Address::from_word(load(cfg.lock_registry_slot)),
        domain: load(cfg.domain_id_slot),
        admin: Address::from_word(load(cfg.admin_slot)),
    }
}

/// Admin transaction replacing the implementation.
pub fn upgrade_to(caller: Address, proxy: Address, new_impl: Address) -> crate::mcvm::Transaction {
    crate::mcvm::Transaction::new(caller, proxy, "upgradeTo").args(vec![new_impl.to_word()])
}

/// Admin transaction switching the guard mode.
pub fn set_mode(caller: Address, proxy: Address, mode: GuardMode) -> crate::mcvm::Transaction {
    crate::mcvm::Transaction::new(caller, proxy, "setMode").args(vec![mode.encode()])
}


#[cfg(test)]
mod flow_tests;
