//! Contract behaviors: victims, attackers and helpers, each a state machine
//! reacting to calls through the VM primitives, with a declared per-function
//! storage read/write set.

mod attackers;
mod bank;
mod ccr;
mod pool;
mod simple;
mod spec;
pub mod storage;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::GuardedBehavior;
use crate::mcvm::{Address, Ctx, FunctionId, Halt, Word};
use crate::sentinel::{LockRegistry, SentinelProxy};

pub use attackers::{
    CcrAttacker, CfrAttacker, ReentryBound, RorAttacker, SfrAttacker, REASON_NO_STAKE, REASON_SWEEP_FAILED,
};
pub use bank::{
    Bank, LedgerUpdate, REASON_INSUFFICIENT_LEDGER, REASON_NOT_DEPOSITED, REASON_NO_DEPOSIT, REASON_SEND_FAILED,
};
pub use ccr::{CcrToken, CcrVault, RedeemMode, REASON_INSUFFICIENT_SHARES, REASON_ONLY_VAULT};
pub use pool::{RewardPool, REASON_CLAIMED, REASON_PAYOUT_FAILED, REASON_POOL_EMPTY};
pub use simple::{Counter, KvStore, Reader};
pub use spec::{BehaviorSpec, FunctionSpec, LedgerDecl};

pub const REASON_UNKNOWN_FUNCTION: &str = "unknown function";

pub(crate) fn unknown(function: &str) -> Halt {
    Halt::revert(format!("{REASON_UNKNOWN_FUNCTION} {function}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    Bank(Bank),
    SfrAttacker(SfrAttacker),
    CfrAttacker(CfrAttacker),
    RorAttacker(RorAttacker),
    CcrAttacker(CcrAttacker),
    RewardPool(RewardPool),
    CcrVault(CcrVault),
    CcrToken(CcrToken),
    Counter(Counter),
    KvStore(KvStore),
    Reader(Reader),
    SentinelProxy(SentinelProxy),
    LockRegistry(LockRegistry),
    Guarded(Box<GuardedBehavior>),
}

impl Behavior {
    /// Runs `function`. An empty function name is a plain transfer and goes to `receive`.
    pub fn execute(&self, ctx: &mut Ctx, function: &FunctionId, args: &[Word]) -> Result<Vec<Word>, Halt> {
        let name = if function.is_empty() { "receive" } else { function.as_str() };
        match self {
            Behavior::Bank(b) => b.execute(ctx, name, args),
            Behavior::SfrAttacker(b) => b.execute(ctx, name, args),
            Behavior::CfrAttacker(b) => b.execute(ctx, name, args),
            Behavior::RorAttacker(b) => b.execute(ctx, name, args),
            Behavior::CcrAttacker(b) => b.execute(ctx, name, args),
            Behavior::RewardPool(b) => b.execute(ctx, name, args),
            Behavior::CcrVault(b) => b.execute(ctx, name, args),
            Behavior::CcrToken(b) => b.execute(ctx, name, args),
            Behavior::Counter(b) => b.execute(ctx, name, args),
            Behavior::KvStore(b) => b.execute(ctx, name, args),
            Behavior::Reader(b) => b.execute(ctx, name, args),
            Behavior::SentinelProxy(b) => b.execute(ctx, function, args),
            Behavior::LockRegistry(b) => b.execute(ctx, name, args),
            Behavior::Guarded(g) => g.execute(ctx, &FunctionId::new(name), args),
        }
    }

    pub fn template(&self) -> &'static str {
        match self {
            Behavior::Bank(_) => Bank::TEMPLATE,
            Behavior::SfrAttacker(_) => SfrAttacker::TEMPLATE,
            Behavior::CfrAttacker(_) => CfrAttacker::TEMPLATE,
            Behavior::RorAttacker(_) => RorAttacker::TEMPLATE,
            Behavior::CcrAttacker(_) => CcrAttacker::TEMPLATE,
            Behavior::RewardPool(_) => RewardPool::TEMPLATE,
            Behavior::CcrVault(_) => CcrVault::TEMPLATE,
            Behavior::CcrToken(_) => CcrToken::TEMPLATE,
            Behavior::Counter(_) => Counter::TEMPLATE,
            Behavior::KvStore(_) => KvStore::TEMPLATE,
            Behavior::Reader(_) => Reader::TEMPLATE,
            Behavior::SentinelProxy(_) => SentinelProxy::TEMPLATE,
            Behavior::LockRegistry(_) => LockRegistry::TEMPLATE,
            Behavior::Guarded(g) => g.inner.template(),
        }
    }

    /// Template whose variable layout governs the storage context this code
    /// runs in. The proxy only touches hashed slots and defers to whatever
    /// implementation it forwards to.
    pub fn layout_template(&self) -> Option<&'static str> {
        match self {
            Behavior::SentinelProxy(_) => None,
            other => Some(other.template()),
        }
    }

    pub fn spec(&self) -> BehaviorSpec {
        spec_for_template(self.template()).expect("every behavior has a registered template")
    }
}

/// Declared spec of a template by name. Specs do not depend on parameters.
pub fn spec_for_template(name: &str) -> Option<BehaviorSpec> {
    Some(match name {
        Bank::TEMPLATE => Bank::spec(),
        SfrAttacker::TEMPLATE => SfrAttacker::spec(),
        CfrAttacker::TEMPLATE => CfrAttacker::spec(),
        RorAttacker::TEMPLATE => RorAttacker::spec(),
        CcrAttacker::TEMPLATE => CcrAttacker::spec(),
        RewardPool::TEMPLATE => RewardPool::spec(),
        CcrVault::TEMPLATE => CcrVault::spec(),
        CcrToken::TEMPLATE => CcrToken::spec(),
        Counter::TEMPLATE => Counter::spec(),
        KvStore::TEMPLATE => KvStore::spec(),
        Reader::TEMPLATE => Reader::spec(),
        SentinelProxy::TEMPLATE => BehaviorSpec::new(name).function("upgradeTo", &[], &[]).function("setMode", &[], &[]),
        LockRegistry::TEMPLATE => BehaviorSpec::new(name)
            .function("register", &[], &[])
            .function("lock", &[], &[])
            .function("unlock", &[], &[])
            .view("isLocked", &[])
            .view("isStaticAllowed", &[])
            .view("lockerOf", &[]),
        _ => return None,
    })
}

pub const TEMPLATE_NAMES: [&str; 13] = [
    Bank::TEMPLATE,
    SfrAttacker::TEMPLATE,
    CfrAttacker::TEMPLATE,
    RorAttacker::TEMPLATE,
    CcrAttacker::TEMPLATE,
    RewardPool::TEMPLATE,
    CcrVault::TEMPLATE,
    CcrToken::TEMPLATE,
    Counter::TEMPLATE,
    KvStore::TEMPLATE,
    Reader::TEMPLATE,
    SentinelProxy::TEMPLATE,
    LockRegistry::TEMPLATE,
];

/// Template parameters as they appear in scenario files. Address-valued
/// parameters name another contract's role (or are a hex address).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<LedgerUpdate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accomplice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vault: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Wei; the same-function attacker re-enters while the victim holds more.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reentries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_fn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_before_call: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redeem: Option<RedeemMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("template {template} needs parameter {param}")]
    MissingParam { template: String, param: &'static str },
    #[error("unresolved address reference {0}")]
    Unresolved(String),
}

/// Builds a behavior from its template name and parameters. `resolve` maps a
/// role name to an address; hex literals are accepted as-is.
pub fn instantiate(
    template: &str,
    params: &TemplateParams,
    resolve: &dyn Fn(&str) -> Option<Address>,
) -> Result<Behavior, TemplateError> {
    let missing = |param| TemplateError::MissingParam { template: template.to_string(), param };
    let addr = |value: &Option<String>, param: &'static str| -> Result<Address, TemplateError> {
        let r = value.as_deref().ok_or_else(|| missing(param))?;
        r.parse::<Address>().ok().or_else(|| resolve(r)).ok_or_else(|| TemplateError::Unresolved(r.to_string()))
    };
    Ok(match template {
        Bank::TEMPLATE => make_victim_bank(params.update.unwrap_or(LedgerUpdate::ZeroAfterSend)),
        SfrAttacker::TEMPLATE => {
            let bound = match (params.reentries, params.threshold) {
                (Some(n), _) => ReentryBound::Count(n),
                (None, Some(t)) => ReentryBound::Threshold(Word::from(t)),
                (None, None) => return Err(missing("threshold")),
            };
            Behavior::SfrAttacker(SfrAttacker { victim: addr(&params.victim, "victim")?, bound })
        }
        CfrAttacker::TEMPLATE => Behavior::CfrAttacker(CfrAttacker {
            victim: addr(&params.victim, "victim")?,
            accomplice: addr(&params.accomplice, "accomplice")?,
        }),
        RorAttacker::TEMPLATE => Behavior::RorAttacker(RorAttacker {
            vault: addr(&params.vault, "vault")?,
            pool: addr(&params.pool, "pool")?,
            trigger: addr(&params.trigger, "trigger")?,
        }),
        CcrAttacker::TEMPLATE => Behavior::CcrAttacker(CcrAttacker {
            vault: addr(&params.vault, "vault")?,
            token: addr(&params.token, "token")?,
            accomplice: addr(&params.accomplice, "accomplice")?,
        }),
        RewardPool::TEMPLATE => Behavior::RewardPool(RewardPool {
            vault: addr(&params.vault, "vault")?,
            view_fn: FunctionId::new(params.view_fn.clone().ok_or_else(|| missing("view_fn"))?),
            rate_bps: params.rate_bps.ok_or_else(|| missing("rate_bps"))?,
        }),
        CcrVault::TEMPLATE => Behavior::CcrVault(CcrVault {
            token: addr(&params.token, "token")?,
            write_before_call: params.write_before_call.unwrap_or(false),
            redeem: params.redeem.unwrap_or(RedeemMode::ForwardEth),
        }),
        CcrToken::TEMPLATE => Behavior::CcrToken(CcrToken {
            vault: addr(&params.vault, "vault")?,
            redeem: params.redeem.unwrap_or(RedeemMode::ForwardEth),
        }),
        Counter::TEMPLATE => Behavior::Counter(Counter),
        KvStore::TEMPLATE => Behavior::KvStore(KvStore { width: params.width.unwrap_or(1) }),
        Reader::TEMPLATE => Behavior::Reader(Reader {
            target: addr(&params.target, "target")?,
            function: FunctionId::new(params.function.clone().ok_or_else(|| missing("function"))?),
        }),
        LockRegistry::TEMPLATE => Behavior::LockRegistry(LockRegistry),
        SentinelProxy::TEMPLATE => Behavior::SentinelProxy(SentinelProxy),
        other => return Err(TemplateError::UnknownTemplate(other.to_string())),
    })
}

/// Bank whose `withdraw` settles the ledger as `update` says.
pub fn make_victim_bank(update: LedgerUpdate) -> Behavior {
    Behavior::Bank(Bank { update })
}

pub fn make_attacker_sfr(victim: Address, threshold: Word) -> Behavior {
    Behavior::SfrAttacker(SfrAttacker { victim, bound: ReentryBound::Threshold(threshold) })
}

/// Victim bank plus an attacker that shuffles its ledger entry to `accomplice`.
pub fn make_cfr_pair(victim: Address, accomplice: Address, update: LedgerUpdate) -> (Behavior, Behavior) {
    (make_victim_bank(update), Behavior::CfrAttacker(CfrAttacker { victim, accomplice }))
}

/// Vault, share token and attacker. Addresses are those the three will be
/// installed at.
pub fn make_ccr_pair(
    vault: Address,
    token: Address,
    accomplice: Address,
    redeem: RedeemMode,
    write_before_call: bool,
) -> (Behavior, Behavior, Behavior) {
    (
        Behavior::CcrVault(CcrVault { token, write_before_call, redeem }),
        Behavior::CcrToken(CcrToken { vault, redeem }),
        Behavior::CcrAttacker(CcrAttacker { vault, token, accomplice }),
    )
}

/// Vulnerable bank, reward pool reading its `totalAssets`, and attacker.
pub fn make_ror_pair(vault: Address, pool: Address, rate_bps: u64) -> (Behavior, Behavior, Behavior) {
    (
        make_victim_bank(LedgerUpdate::ZeroAfterSend),
        Behavior::RewardPool(RewardPool { vault, view_fn: FunctionId::new("totalAssets"), rate_bps }),
        Behavior::RorAttacker(RorAttacker { vault, pool, trigger: vault }),
    )
}
