//! Function-level comparison guards: a contract-global counter lock and a
//! balance-minus-ledger conservation check. Both wrap an inner behavior and
//! only intercept the functions in their attachment set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::storage::Ledger;
use crate::behaviors::{Behavior, BehaviorSpec};
use crate::mcvm::{require, Address, Ctx, FunctionId, Halt, Word, WorldState};
use crate::sentinel::derive_slot;

pub const REASON_REENTRANT: &str = "reentrant call";
pub const REASON_BALANCE_INVARIANT: &str = "balance invariant violated";

pub const COUNTER_STATUS_LABEL: &str = "baseline.counterGuard.status";
pub const NOT_ENTERED: u64 = 1;
pub const ENTERED: u64 = 2;

pub fn counter_status_slot() -> Word {
    derive_slot(COUNTER_STATUS_LABEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Counter,
    BalanceDelta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardAttachment {
    pub kind: BaselineKind,
    pub functions: BTreeSet<FunctionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttachError {
    #[error("template {0} declares no ledger")]
    NoLedger(String),
    #[error("template {template} has no function {function}")]
    UnknownFunction { template: String, function: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardedBehavior {
    pub inner: Behavior,
    pub attachment: GuardAttachment,
}

impl GuardedBehavior {
    /// Wraps `inner`, checking that the attachment makes sense for its spec.
    pub fn attach(inner: Behavior, attachment: GuardAttachment) -> Result<Self, AttachError> {
        let spec = inner.spec();
        if attachment.kind == BaselineKind::BalanceDelta && spec.ledger.is_none() {
            return Err(AttachError::NoLedger(spec.template));
        }
        if let Some(f) = attachment.functions.iter().find(|f| !spec.functions.contains_key(*f)) {
            return Err(AttachError::UnknownFunction { template: spec.template, function: f.to_string() });
        }
        Ok(GuardedBehavior { inner, attachment })
    }

    pub fn spec(&self) -> BehaviorSpec {
        self.inner.spec()
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &FunctionId, args: &[Word]) -> Result<Vec<Word>, Halt> {
        if !self.attachment.functions.contains(function) {
            return self.inner.execute(ctx, function, args);
        }
        match self.attachment.kind {
            BaselineKind::Counter => {
                let slot = counter_status_slot();
                require(ctx.sload(slot)? != Word::from(ENTERED), REASON_REENTRANT)?;
                ctx.sstore(slot, Word::from(ENTERED))?;
                let out = self.inner.execute(ctx, function, args)?;
                ctx.sstore(slot, Word::from(NOT_ENTERED))?;
                Ok(out)
            }
            BaselineKind::BalanceDelta => {
                let ledger = Ledger::standard();
                let received = ctx.value();
                let before = ctx.self_balance().overflowing_sub(received).0.overflowing_sub(ledger.total(ctx)?).0;
                let out = self.inner.execute(ctx, function, args)?;
                let after = ctx.self_balance().overflowing_sub(ledger.total(ctx)?).0;
                require(after == before, REASON_BALANCE_INVARIANT)?;
                Ok(out)
            }
        }
    }
}

/// Deploy-time initialization of a guarded account's guard storage.
pub fn init_guard_storage(world: &mut WorldState, at: Address, kind: BaselineKind) {
    if kind == BaselineKind::Counter {
        world.store(at, counter_status_slot(), Word::from(NOT_ENTERED));
    }
}
