//! Vault/share-token pair. The vault holds ETH; the token keeps the share
//! ledger and calls out to the holder during `redeem` before burning.

use serde::{Deserialize, Serialize};

use super::bank::{REASON_NOT_DEPOSITED, REASON_NO_DEPOSIT, REASON_SEND_FAILED};
use super::spec::BehaviorSpec;
use super::storage::{arg, arg_address, Ledger, Scalar};
use super::unknown;
use crate::mcvm::{require, Address, CallKind, Ctx, Halt, Word};

pub const REASON_ONLY_VAULT: &str = "only vault";
pub const REASON_INSUFFICIENT_SHARES: &str = "insufficient shares";

const LEDGER: Ledger = Ledger::standard();
const SUPPLY: Scalar = Scalar::new("totalSupply", 1);
const DEPOSITED: Scalar = Scalar::new("totalDeposited", 0);

/// How redeemed ETH reaches the holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedeemMode {
    /// The vault forwards the ETH with `redeem`; the token pays the holder.
    ForwardEth,
    /// The token calls `onRedeem` on the holder; the vault pays afterwards.
    Hook,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcrVault {
    pub token: Address,
    /// Update `totalDeposited` before calling the token rather than after.
    pub write_before_call: bool,
    pub redeem: RedeemMode,
}

impl CcrVault {
    pub const TEMPLATE: &'static str = "ccr_vault";

    pub fn spec() -> BehaviorSpec {
        BehaviorSpec::new(Self::TEMPLATE)
            .function("deposit", &["totalDeposited"], &["totalDeposited"])
            .function("withdraw", &["totalDeposited"], &["totalDeposited"])
            .view("totalAssets", &["totalDeposited"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "deposit" => {
                let value = ctx.value();
                require(!value.is_zero(), REASON_NO_DEPOSIT)?;
                DEPOSITED.add(ctx, value)?;
                let sender = ctx.caller();
                ctx.call(CallKind::RegularCall, self.token, "mint", vec![sender.to_word(), value], Word::zero(), None)?
                    .bubble()?;
                Ok(vec![])
            }
            "withdraw" => {
                let sender = ctx.caller();
                let shares = ctx.static_call(self.token, "balanceOf", vec![sender.to_word()])?.bubble()?;
                let shares = shares.first().copied().unwrap_or_default();
                require(!shares.is_zero(), REASON_NOT_DEPOSITED)?;
                if self.write_before_call {
                    DEPOSITED.sub(ctx, shares)?;
                }
                let redeem_args = vec![sender.to_word(), shares];
                match self.redeem {
                    RedeemMode::ForwardEth => {
                        ctx.call(CallKind::RegularCall, self.token, "redeem", redeem_args, shares, None)?.bubble()?;
                    }
                    RedeemMode::Hook => {
                        ctx.call(CallKind::RegularCall, self.token, "redeem", redeem_args, Word::zero(), None)?
                            .bubble()?;
                        ctx.send(sender, shares)?.require_success(REASON_SEND_FAILED)?;
                    }
                }
                if !self.write_before_call {
                    DEPOSITED.sub(ctx, shares)?;
                }
                Ok(vec![shares])
            }
            "totalAssets" => Ok(vec![DEPOSITED.read(ctx)?]),
            other => Err(unknown(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcrToken {
    pub vault: Address,
    pub redeem: RedeemMode,
}

impl CcrToken {
    pub const TEMPLATE: &'static str = "ccr_token";

    pub fn spec() -> BehaviorSpec {
        let ledger = ["balances", "participants", "participantIndex"];
        let mut rw: Vec<&str> = ledger.to_vec();
        rw.push("totalSupply");
        BehaviorSpec::new(Self::TEMPLATE)
            .function("mint", &rw, &rw)
            .function("redeem", &rw, &rw)
            .function("transfer", &ledger, &ledger)
            .view("balanceOf", &["balances"])
            .view("totalSupply", &["totalSupply"])
            .with_ledger("balances", "participants")
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "mint" => {
                require(ctx.caller() == self.vault, REASON_ONLY_VAULT)?;
                let to = arg_address(args, 0)?;
                let amount = arg(args, 1)?;
                LEDGER.credit(ctx, to, amount)?;
                SUPPLY.add(ctx, amount)?;
                Ok(vec![])
            }
            "redeem" => {
                require(ctx.caller() == self.vault, REASON_ONLY_VAULT)?;
                let holder = arg_address(args, 0)?;
                let shares = arg(args, 1)?;
                let stale = LEDGER.get(ctx, holder)?;
                require(stale >= shares, REASON_INSUFFICIENT_SHARES)?;
                match self.redeem {
                    RedeemMode::ForwardEth => {
                        let value = ctx.value();
                        ctx.send(holder, value)?.require_success(REASON_SEND_FAILED)?;
                    }
                    RedeemMode::Hook => {
                        ctx.call(CallKind::RegularCall, holder, "onRedeem", vec![shares], Word::zero(), None)?
                            .bubble()?;
                    }
                }
                LEDGER.set(ctx, holder, stale - shares)?;
                SUPPLY.sub(ctx, shares)?;
                Ok(vec![])
            }
            "transfer" => {
                let to = arg_address(args, 0)?;
                let amount = arg(args, 1)?;
                let sender = ctx.caller();
                let from_bal = LEDGER.get(ctx, sender)?;
                require(from_bal >= amount, REASON_INSUFFICIENT_SHARES)?;
                LEDGER.set(ctx, sender, from_bal - amount)?;
                LEDGER.credit(ctx, to, amount)?;
                Ok(vec![])
            }
            "balanceOf" => Ok(vec![LEDGER.get(ctx, arg_address(args, 0)?)?]),
            "totalSupply" => Ok(vec![SUPPLY.read(ctx)?]),
            other => Err(unknown(other)),
        }
    }
}
