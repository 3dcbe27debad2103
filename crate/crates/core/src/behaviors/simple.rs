//! Small workloads used by tests and gas measurements.

use super::spec::BehaviorSpec;
use super::storage::{Mapping, Scalar};
use super::unknown;
use crate::mcvm::{Address, CallKind, Ctx, FunctionId, Halt, Word};

const COUNT: Scalar = Scalar::new("count", 0);
const VALUES: Mapping = Mapping::new("values", 0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counter;

impl Counter {
    pub const TEMPLATE: &'static str = "counter";

    pub fn spec() -> BehaviorSpec {
        BehaviorSpec::new(Self::TEMPLATE)
            .function("increment", &["count"], &["count"])
            .view("get", &["count"])
            .function("receive", &[], &[])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "increment" => {
                let v = COUNT.add(ctx, Word::one())?;
                ctx.log(1)?;
                Ok(vec![v])
            }
            "get" => Ok(vec![COUNT.read(ctx)?]),
            "receive" => Ok(vec![]),
            other => Err(unknown(other)),
        }
    }
}

/// Touches `width` mapping entries per call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvStore {
    pub width: u32,
}

impl KvStore {
    pub const TEMPLATE: &'static str = "kv_store";

    pub fn spec() -> BehaviorSpec {
        BehaviorSpec::new(Self::TEMPLATE)
            .function("bump", &["values"], &["values"])
            .view("sum", &["values"])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, _args: &[Word]) -> Result<Vec<Word>, Halt> {
        match function {
            "bump" => {
                for i in 0..self.width {
                    let key = Word::from(i);
                    let v = VALUES.read(ctx, key)?;
                    VALUES.write(ctx, key, v.overflowing_add(Word::one()).0)?;
                }
                ctx.log(0)?;
                Ok(vec![])
            }
            "sum" => {
                let mut total = Word::zero();
                for i in 0..self.width {
                    total = total.overflowing_add(VALUES.read(ctx, Word::from(i))?).0;
                }
                Ok(vec![total])
            }
            other => Err(unknown(other)),
        }
    }
}

/// Forwards to a fixed target function with a chosen call kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reader {
    pub target: Address,
    pub function: FunctionId,
}

impl Reader {
    pub const TEMPLATE: &'static str = "reader";

    pub fn spec() -> BehaviorSpec {
        BehaviorSpec::new(Self::TEMPLATE)
            .view("query", &[])
            .function("poke", &[], &[])
            .function("delegate", &[], &[])
    }

    pub fn execute(&self, ctx: &mut Ctx, function: &str, args: &[Word]) -> Result<Vec<Word>, Halt> {
        let kind = match function {
            "query" => CallKind::StaticCall,
            "poke" => CallKind::RegularCall,
            "delegate" => CallKind::DelegateCall,
            other => return Err(unknown(other)),
        };
        let value = if kind == CallKind::RegularCall { ctx.value() } else { Word::zero() };
        ctx.call(kind, self.target, self.function.clone(), args.to_vec(), value, None)?.bubble()
    }
}
