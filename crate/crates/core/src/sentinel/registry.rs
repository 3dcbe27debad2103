use super::{ALLOWED, DISALLOWED, LOCKED, UNLOCKED};
use crate::hash::mapping_slot;
use crate::mcvm::{require, Address, Ctx, Halt, Word, WorldState};

pub const REASON_DOMAIN_LOCKED: &str = "domain locked";
pub const REASON_NOT_LOCKER: &str = "not locker";

/// Packed status word: lock code in byte 0, static code in byte 1.
pub const STATUS_FREE: Word = primitive_types::U256([(ALLOWED << 8) | UNLOCKED, 0, 0, 0]);
pub const STATUS_HELD: Word = primitive_types::U256([(DISALLOWED << 8) | LOCKED, 0, 0, 0]);

pub(super) fn status_slot(domain: Word) -> Word {
    mapping_slot(domain, Word::zero())
}

pub(super) fn locker_slot(domain: Word) -> Word {
    mapping_slot(domain, Word::one())
}

fn lock_code(status: Word) -> u64 {
    status.low_u64() & 0xff
}

fn static_code(status: Word) -> u64 {
    (status.low_u64() >> 8) & 0xff
}

/// Decoded registry entry of one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockRegistryState {
    pub locked: bool,
    pub locker: Address,
    pub static_allowed: bool,
}

pub fn registry_state(world: &WorldState, registry: Address, domain: Word) -> LockRegistryState {
    let status = world.load(registry, status_slot(domain));
    LockRegistryState {
        locked: lock_code(status) == LOCKED,
        locker: Address::from_word(world.load(registry, locker_slot(domain))),
        static_allowed: static_code(status) != DISALLOWED,
    }
}

/// Per-domain mutex shared by all proxies of a domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockRegistry;

impl LockRegistry {
    pub const TEMPLATE: &'static str = "lock_registry";

    pub fn execute(&self, ctx: &mut Ctx, function: &str, args: &[Word]) -> Result<Vec<Word>, Halt> {
        let domain = args.first().copied().unwrap_or_default();
        let status_slot = status_slot(domain);
        let locker_slot = locker_slot(domain);
        let flag = |b: bool| vec![if b { Word::one() } else { Word::zero() }];
        match function {
            "register" => {
                if ctx.sload(status_slot)?.is_zero() {
                    ctx.sstore(status_slot, STATUS_FREE)?;
                }
                Ok(vec![])
            }
            "isLocked" => Ok(flag(lock_code(ctx.sload(status_slot)?) == LOCKED)),
            "isStaticAllowed" => Ok(flag(static_code(ctx.sload(status_slot)?) != DISALLOWED)),
            "lockerOf" => Ok(vec![ctx.sload(locker_slot)?]),
            "lock" => {
                let status = ctx.sload(status_slot)?;
                require(lock_code(status) != LOCKED, REASON_DOMAIN_LOCKED)?;
                ctx.sstore(status_slot, STATUS_HELD)?;
                let caller = ctx.caller();
                ctx.sstore(locker_slot, caller.to_word())?;
                Ok(vec![])
            }
            "unlock" => {
                let locker = Address::from_word(ctx.sload(locker_slot)?);
                require(locker == ctx.caller(), REASON_NOT_LOCKER)?;
                ctx.sstore(locker_slot, Word::zero())?;
                ctx.sstore(status_slot, STATUS_FREE)?;
                Ok(vec![])
            }
            other => Err(crate::behaviors::unknown(other)),
        }
    }
}
