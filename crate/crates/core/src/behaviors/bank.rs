use serde::{Deserialize, Serialize};

use super::spec::BehaviorSpec;
use super::storage::{arg, arg_address, Ledger};
use super::unknown;
use crate::mcvm::{require, Ctx, Halt, Word};

pub const REASON_NO_DEPOSIT: &str = "Please deposit some ETH";
pub const REASON_NOT_DEPOSITED: &str = "the user did not deposit that amount in this contract";
pub const REASON_SEND_FAILED: &str = "Failed to send Ether";
pub const REASON_INSUFFICIENT_LEDGER: &str = "insufficient ledger balance";

const LEDGER: Ledger = Ledger::standard();

/// How `withdraw` settles the caller's ledger entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerUpdate {
    /// `balances[sender] = 0` after the transfer.
    ZeroAfterSend,
    /// `balances[sender] -= amount` after the transfer, unchecked.
    WrappingSubAfterSend,
    /// Checks-effects-interactions ordering.
    ZeroBeforeSend,
}

/// ETH bank with per-user ledger and internal transfers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bank {
    pub update: LedgerUpdate,
}

impl Bank {
    pub const TEMPLATE: &'static str = "bank";

    pub fn spec() -> BehaviorSpec {
        let ledger = ["balances", "participants", "participantIndex"];
        BehaviorSpec::new(Self::TEMPLATE)
            .function("deposit", &ledger, &ledger)
            .function("withdraw", &ledger, &ledger)
            .function("transfer", &ledger, &ledger)
            .view("balanceOf", &["balances"])
            .view("totalAssets", &["balances", "participants"])
            .with_ledger("balances", "participants")
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "deposit" => {
                let value = ctx.value();
                require(!value.is_zero(), REASON_NO_DEPOSIT)?;
                let sender = ctx.caller();
                LEDGER.credit(ctx, sender, value)?;
                Ok(vec![])
            }
            "withdraw" => {
                let sender = ctx.caller();
                let amount = LEDGER.get(ctx, sender)?;
                require(!amount.is_zero(), REASON_NOT_DEPOSITED)?;
                if self.update == LedgerUpdate::ZeroBeforeSend {
                    LEDGER.set(ctx, sender, Word::zero())?;
                }
                ctx.send(sender, amount)?.require_success(REASON_SEND_FAILED)?;
                match self.update {
                    LedgerUpdate::ZeroAfterSend => LEDGER.set(ctx, sender, Word::zero())?,
                    LedgerUpdate::WrappingSubAfterSend => {
                        let current = LEDGER.get(ctx, sender)?;
                        LEDGER.set(ctx, sender, current.overflowing_sub(amount).0)?;
                    }
                    LedgerUpdate::ZeroBeforeSend => {}
                }
                Ok(vec![amount])
            }
            "transfer" => {
                let to = arg_address(args, 0)?;
                let amount = arg(args, 1)?;
                if amount.is_zero() {
                    return Ok(vec![]);
                }
                let sender = ctx.caller();
                let from_bal = LEDGER.get(ctx, sender)?;
                require(from_bal >= amount, REASON_INSUFFICIENT_LEDGER)?;
                LEDGER.set(ctx, sender, from_bal - amount)?;
                LEDGER.credit(ctx, to, amount)?;
                Ok(vec![])
            }
            "balanceOf" => Ok(vec![LEDGER.get(ctx, arg_address(args, 0)?)?]),
            // Sum of recorded deposits, the figure other protocols price against.
            "totalAssets" => Ok(vec![LEDGER.total(ctx)?]),
            other => Err(unknown(other)),
        }
    }
}
