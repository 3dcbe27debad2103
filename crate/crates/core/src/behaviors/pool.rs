use super::spec::BehaviorSpec;
use super::storage::Mapping;
use super::unknown;
use crate::mcvm::{require, Address, Ctx, FunctionId, Halt, Word};

pub const REASON_CLAIMED: &str = "reward already claimed";
pub const REASON_POOL_EMPTY: &str = "pool exhausted";
pub const REASON_PAYOUT_FAILED: &str = "reward transfer failed";

const CLAIMED: Mapping = Mapping::new("claimed", 0);

/// Pays each caller once, `rate_bps / 10000` of a figure read from another
/// contract's view function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardPool {
    pub vault: Address,
    pub view_fn: FunctionId,
    pub rate_bps: u64,
}

impl RewardPool {
    pub const TEMPLATE: &'static str = "reward_pool";

    pub fn spec() -> BehaviorSpec {
        BehaviorSpec::new(Self::TEMPLATE)
            .function("getReward", &["claimed"], &["claimed"])
            .function("receive", &[], &[])
    }

    pub fn reward_for(total: Word, rate_bps: u64) -> Word {
        total.overflowing_mul(Word::from(rate_bps)).0 / Word::from(10_000u64)
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "getReward" => {
                let who = ctx.caller().to_word();
                require(CLAIMED.read(ctx, who)?.is_zero(), REASON_CLAIMED)?;
                let total = ctx.static_call(self.vault, self.view_fn.as_str(), vec![])?.bubble()?;
                let total = total.first().copied().unwrap_or_default();
                let reward = Self::reward_for(total, self.rate_bps);
                require(ctx.self_balance() >= reward, REASON_POOL_EMPTY)?;
                CLAIMED.write(ctx, who, Word::one())?;
                let to = ctx.caller();
                ctx.send(to, reward)?.require_success(REASON_PAYOUT_FAILED)?;
                Ok(vec![reward])
            }
            "receive" => Ok(vec![]),
            other => Err(unknown(other)),
        }
    }
}
