use super::{GuardMode, ProxyConfig, ALLOWED, DISALLOWED, LOCKED, LOCK_ACTIVATED_TOPICS, UNLOCKED};
use crate::mcvm::{require, Address, CallKind, Ctx, FunctionId, Halt, Word, PROBE_FUNCTION};

pub const REASON_OPTIMIZED: &str = "Reentrancy Error (Optimized Mode)";
pub const REASON_HIGH_SECURITY: &str = "Reentrancy Error (High-Security Mode)";
pub const REASON_STATIC: &str = "Reentrancy Error (Static Mode)";
pub const REASON_REGISTRY_UNSET: &str = "registry unset";
pub const REASON_NOT_ADMIN: &str = "not admin";
pub const REASON_INVALID_MODE: &str = "invalid mode";
pub const REASON_IMPLEMENTATION_UNSET: &str = "implementation unset";

/// What the guard did on entry, so cleanup can undo exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entry {
    Optimized,
    /// Took the domain lock in the registry.
    DomainLocked,
    /// Entered while the domain lock is held by the calling proxy.
    DomainNested,
}

/// Proxy behavior. Stateless: everything it needs is in its storage slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentinelProxy;

impl SentinelProxy {
    pub const TEMPLATE: &'static str = "sentinel_proxy";

    pub fn execute(&self, ctx: &mut Ctx, function: &FunctionId, args: &[Word]) -> Result<Vec<Word>, Halt> {
        let cfg = ProxyConfig::canonical();
        match function.as_str() {
            // Any state-changing op will do; a log is the cheapest.
            PROBE_FUNCTION => {
                ctx.log(0)?;
                Ok(vec![])
            }
            "upgradeTo" => {
                only_admin(ctx, &cfg)?;
                let new_impl = args.first().copied().unwrap_or_default();
                ctx.sstore(cfg.implementation_slot, new_impl)?;
                Ok(vec![])
            }
            "setMode" => {
                only_admin(ctx, &cfg)?;
                let mode = args.first().copied().unwrap_or_default();
                require(GuardMode::decode(mode).is_some(), REASON_INVALID_MODE)?;
                ctx.sstore(cfg.mode_slot, mode)?;
                Ok(vec![])
            }
            _ => fallback(ctx, &cfg, function, args),
        }
    }
}

fn only_admin(ctx: &mut Ctx, cfg: &ProxyConfig) -> Result<(), Halt> {
    let admin = Address::from_word(ctx.sload(cfg.admin_slot)?);
    require(ctx.caller() == admin, REASON_NOT_ADMIN)
}

fn fallback(ctx: &mut Ctx, cfg: &ProxyConfig, function: &FunctionId, args: &[Word]) -> Result<Vec<Word>, Halt> {
    let is_static = ctx.probe_static()?;
    let entry = if is_static {
        let allowed = ctx.sload(cfg.static_call_allowed_slot)?;
        require(allowed == Word::from(ALLOWED), REASON_STATIC)?;
        None
    } else {
        Some(match read_mode(ctx, cfg)? {
            GuardMode::Optimized => optimized_guard(ctx, cfg)?,
            GuardMode::HighSecurity => high_security_guard(ctx, cfg)?,
        })
    };
    let implementation = Address::from_word(ctx.sload(cfg.implementation_slot)?);
    require(!implementation.is_zero(), REASON_IMPLEMENTATION_UNSET)?;
    let outcome = ctx.call(CallKind::DelegateCall, implementation, function.clone(), args.to_vec(), Word::zero(), None)?;
    if let Some(entry) = entry {
        cleanup(ctx, cfg, entry)?;
    }
    outcome.bubble()
}

fn read_mode(ctx: &mut Ctx, cfg: &ProxyConfig) -> Result<GuardMode, Halt> {
    GuardMode::decode(ctx.sload(cfg.mode_slot)?).ok_or_else(|| Halt::revert(REASON_INVALID_MODE))
}

fn optimized_guard(ctx: &mut Ctx, cfg: &ProxyConfig) -> Result<Entry, Halt> {
    let status = ctx.sload(cfg.lock_status_slot)?;
    require(status == Word::from(UNLOCKED), REASON_OPTIMIZED)?;
    ctx.sstore(cfg.lock_status_slot, Word::from(LOCKED))?;
    ctx.sstore(cfg.static_call_allowed_slot, Word::from(DISALLOWED))?;
    Ok(Entry::Optimized)
}

fn registry_of(ctx: &mut Ctx, cfg: &ProxyConfig) -> Result<(Word, Address), Halt> {
    let domain = ctx.sload(cfg.domain_id_slot)?;
    let registry = Address::from_word(ctx.sload(cfg.lock_registry_slot)?);
    require(!registry.is_zero(), REASON_REGISTRY_UNSET)?;
    Ok((domain, registry))
}

fn registry_call(ctx: &mut Ctx, registry: Address, function: &str, domain: Word) -> Result<Word, Halt> {
    let out = ctx.call(CallKind::RegularCall, registry, function, vec![domain], Word::zero(), None)?;
    Ok(out.bubble()?.first().copied().unwrap_or_default())
}

fn high_security_guard(ctx: &mut Ctx, cfg: &ProxyConfig) -> Result<Entry, Halt> {
    let (domain, registry) = registry_of(ctx, cfg)?;
    if !registry_call(ctx, registry, "isLocked", domain)?.is_zero() {
        // A domain member calling another member while holding the lock is
        // the domain's own flow, not a re-entry from outside.
        let locker = Address::from_word(registry_call(ctx, registry, "lockerOf", domain)?);
        require(locker == ctx.caller(), REASON_HIGH_SECURITY)?;
        ctx.sstore(cfg.static_call_allowed_slot, Word::from(DISALLOWED))?;
        return Ok(Entry::DomainNested);
    }
    registry_call(ctx, registry, "lock", domain)?;
    ctx.sstore(cfg.static_call_allowed_slot, Word::from(DISALLOWED))?;
    ctx.log(LOCK_ACTIVATED_TOPICS)?;
    Ok(Entry::DomainLocked)
}

fn cleanup(ctx: &mut Ctx, cfg: &ProxyConfig, entry: Entry) -> Result<(), Halt> {
    match entry {
        Entry::Optimized => ctx.sstore(cfg.lock_status_slot, Word::from(UNLOCKED))?,
        Entry::DomainLocked => {
            let (domain, registry) = registry_of(ctx, cfg)?;
            registry_call(ctx, registry, "unlock", domain)?;
        }
        Entry::DomainNested => {}
    }
    ctx.sstore(cfg.static_call_allowed_slot, Word::from(ALLOWED))
}
