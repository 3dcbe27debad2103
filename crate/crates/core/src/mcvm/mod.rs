//! Deterministic message-call machine: accounts, storage, gas-metered frames
//! and ordered execution traces.

mod gas;
pub mod trace;
mod types;
mod vm;

pub use gas::GasSchedule;
pub use trace::{ExecutionTrace, FrameInfo, FrameRecord, TraceError, TraceEvent, TraceRecord};
pub use types::{
    ether, word, word_to_u128, Account, Address, AddressParseError, CallFrame, CallKind, ExecResult, FrameStatus,
    FunctionId, Word, WorldState, WEI_PER_ETHER,
};
pub use vm::{
    execute_transaction, require, CallOutcome, Ctx, Halt, Transaction, Vm, MAX_CALL_DEPTH, PROBE_FUNCTION,
    REASON_DEPTH, REASON_INSUFFICIENT_FUNDS, REASON_NO_SUCH_ACCOUNT, REASON_OUT_OF_GAS, REASON_STATIC_VIOLATION,
};
