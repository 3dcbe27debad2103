use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::gas::GasSchedule;
use super::trace::{ExecutionTrace, FrameInfo, TraceEvent, TraceRecord};
use super::types::{Address, CallFrame, CallKind, ExecResult, FrameStatus, FunctionId, Word, WorldState};

/// Hard bound on nested frames; deeper calls fail without creating a frame.
pub const MAX_CALL_DEPTH: usize = 64;

/// Function name of the static-context probe sub-call.
pub const PROBE_FUNCTION: &str = "__probe";

pub const REASON_OUT_OF_GAS: &str = "out of gas";
pub const REASON_STATIC_VIOLATION: &str = "static violation";
pub const REASON_INSUFFICIENT_FUNDS: &str = "insufficient funds";
pub const REASON_NO_SUCH_ACCOUNT: &str = "no such account";
pub const REASON_DEPTH: &str = "call depth exceeded";

/// Abnormal end of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Halt {
    /// Explicit revert; unused gas goes back to the caller.
    Revert(String),
    /// Exceptional halt; consumes the whole frame budget.
    OutOfGas,
    /// State change attempted under the static flag; consumes the whole frame budget.
    StaticViolation,
}

impl Halt {
    pub fn revert(reason: impl Into<String>) -> Self {
        Halt::Revert(reason.into())
    }

    pub fn reason(&self) -> String {
        match self {
            Halt::Revert(r) => r.clone(),
            Halt::OutOfGas => REASON_OUT_OF_GAS.to_string(),
            Halt::StaticViolation => REASON_STATIC_VIOLATION.to_string(),
        }
    }

    fn consumes_all_gas(&self) -> bool {
        !matches!(self, Halt::Revert(_))
    }
}

impl fmt::Display for Halt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason())
    }
}

pub fn require(cond: bool, reason: &str) -> Result<(), Halt> {
    if cond {
        Ok(())
    } else {
        Err(Halt::revert(reason))
    }
}

/// What a caller observes from a sub-call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallOutcome {
    pub success: bool,
    pub output: Result<Vec<Word>, String>,
    pub gas_used: u64,
}

impl CallOutcome {
    /// Re-raises a failed sub-call with the callee's revert reason.
    pub fn bubble(self) -> Result<Vec<Word>, Halt> {
        self.output.map_err(Halt::Revert)
    }

    /// Re-raises a failed sub-call with a fixed reason.
    pub fn require_success(self, reason: &str) -> Result<Vec<Word>, Halt> {
        self.output.map_err(|_| Halt::revert(reason))
    }

    pub fn first_word(&self) -> Word {
        match &self.output {
            Ok(data) => data.first().copied().unwrap_or_default(),
            Err(_) => Word::zero(),
        }
    }

    fn into_result(self) -> ExecResult {
        ExecResult { success: self.success, return_data: self.output, gas_used: self.gas_used }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub origin: Address,
    pub target: Address,
    pub function: FunctionId,
    pub args: Vec<Word>,
    pub value: Word,
    pub gas_limit: u64,
}

impl Transaction {
    pub fn new(origin: Address, target: Address, function: impl Into<FunctionId>) -> Self {
        Transaction {
            origin,
            target,
            function: function.into(),
            args: Vec::new(),
            value: Word::zero(),
            gas_limit: 30_000_000,
        }
    }

    pub fn args(mut self, args: Vec<Word>) -> Self {
        self.args = args;
        self
    }

    pub fn value(mut self, value: Word) -> Self {
        self.value = value;
        self
    }

    pub fn gas_limit(mut self, gas: u64) -> Self {
        self.gas_limit = gas;
        self
    }
}

struct FrameRequest {
    parent: Option<u32>,
    kind: CallKind,
    caller: Address,
    code_address: Address,
    storage_context: Address,
    value: Word,
    transfer: bool,
    function: FunctionId,
    args: Vec<Word>,
    gas: u64,
    static_flag: bool,
}

#[derive(Default)]
struct TxState {
    time: u64,
    events: Vec<TraceRecord>,
    frames: Vec<CallFrame>,
    stack: Vec<u32>,
    warm_slots: BTreeSet<(Address, Word)>,
    warm_accounts: BTreeSet<Address>,
    labels: BTreeMap<(Address, Word), String>,
    bindings: BTreeMap<Address, String>,
}

/// Single-threaded message-call machine owning its world.
pub struct Vm {
    pub world: WorldState,
    pub schedule: GasSchedule,
    tx: TxState,
}

impl Vm {
    pub fn new(world: WorldState) -> Self {
        Self::with_schedule(world, GasSchedule::default())
    }

    pub fn with_schedule(world: WorldState, schedule: GasSchedule) -> Self {
        Vm { world, schedule, tx: TxState::default() }
    }

    /// Frames of the most recent transaction, indexed by frame id.
    pub fn last_frames(&self) -> &[CallFrame] {
        &self.tx.frames
    }

    /// Runs one transaction. On failure the world is left exactly as it was.
    pub fn execute(&mut self, tx: &Transaction) -> (ExecutionTrace, ExecResult) {
        self.tx = TxState::default();
        let fail = |reason: &str| ExecResult { success: false, return_data: Err(reason.to_string()), gas_used: 0 };
        if tx.gas_limit == 0 {
            return (ExecutionTrace::default(), fail(REASON_OUT_OF_GAS));
        }
        if !self.world.exists(tx.target) {
            return (ExecutionTrace::default(), fail(REASON_NO_SUCH_ACCOUNT));
        }
        if !self.world.exists(tx.origin) || self.world.balance(tx.origin) < tx.value {
            return (ExecutionTrace::default(), fail(REASON_INSUFFICIENT_FUNDS));
        }
        self.tx.warm_accounts.insert(tx.origin);
        self.tx.warm_accounts.insert(tx.target);
        let outcome = self.run_frame(FrameRequest {
            parent: None,
            kind: CallKind::RegularCall,
            caller: tx.origin,
            code_address: tx.target,
            storage_context: tx.target,
            value: tx.value,
            transfer: true,
            function: tx.function.clone(),
            args: tx.args.clone(),
            gas: tx.gas_limit,
            static_flag: false,
        });
        if outcome.success {
            if let Some(acct) = self.world.accounts.get_mut(&tx.origin) {
                acct.nonce += 1;
            }
        }
        let trace = ExecutionTrace {
            events: std::mem::take(&mut self.tx.events),
            bindings: std::mem::take(&mut self.tx.bindings),
            labels: std::mem::take(&mut self.tx.labels),
        };
        (trace, outcome.into_result())
    }

    fn tick(&mut self) -> u64 {
        self.tx.time += 1;
        self.tx.time
    }

    fn record(&mut self, event: TraceEvent) {
        let time = self.tick();
        self.tx.events.push(TraceRecord { time, event });
    }

    fn run_frame(&mut self, req: FrameRequest) -> CallOutcome {
        if self.tx.stack.len() >= MAX_CALL_DEPTH {
            return CallOutcome { success: false, output: Err(REASON_DEPTH.to_string()), gas_used: 0 };
        }
        let snapshot = (
            self.world.accounts.clone(),
            self.tx.warm_slots.clone(),
            self.tx.warm_accounts.clone(),
        );
        let id = self.tx.frames.len() as u32;
        let info = FrameInfo {
            frame_id: id,
            parent: req.parent,
            call_kind: req.kind,
            caller: req.caller,
            code_address: req.code_address,
            context: req.storage_context,
            value: req.value,
            function: req.function.clone(),
            static_flag: req.static_flag,
            gas_limit: req.gas,
            args: req.args.clone(),
        };
        self.record(TraceEvent::FrameEnter(info));
        let enter_time = self.tx.time;
        self.tx.frames.push(CallFrame {
            frame_id: id,
            parent: req.parent,
            kind: req.kind,
            caller: req.caller,
            code_address: req.code_address,
            storage_context: req.storage_context,
            value: req.value,
            function: req.function.clone(),
            static_flag: req.static_flag,
            gas_limit: req.gas,
            gas_used: 0,
            enter_time,
            exit_time: None,
            status: FrameStatus::Open,
            args: req.args.clone(),
            return_data: None,
        });
        self.tx.stack.push(id);

        let result = self.exec_body(id, &req);

        let gas_used = match &result {
            Err(halt) if halt.consumes_all_gas() => req.gas,
            _ => self.tx.frames[id as usize].gas_used,
        };
        let output = result.map_err(|h| h.reason());
        if output.is_err() {
            let (accounts, warm_slots, warm_accounts) = snapshot;
            self.world.accounts = accounts;
            self.tx.warm_slots = warm_slots;
            self.tx.warm_accounts = warm_accounts;
        }
        self.tx.stack.pop();
        let status = if output.is_ok() { FrameStatus::Success } else { FrameStatus::Reverted };
        self.record(TraceEvent::FrameExit {
            frame_id: id,
            status,
            gas_used,
            reason: output.as_ref().err().cloned(),
        });
        let exit_time = self.tx.time;
        let frame = &mut self.tx.frames[id as usize];
        frame.exit_time = Some(exit_time);
        frame.status = status;
        frame.gas_used = gas_used;
        frame.return_data = Some(output.clone());
        CallOutcome { success: output.is_ok(), output, gas_used }
    }

    fn exec_body(&mut self, id: u32, req: &FrameRequest) -> Result<Vec<Word>, Halt> {
        if req.transfer && !req.value.is_zero() {
            if req.static_flag {
                return Err(Halt::StaticViolation);
            }
            if self.world.balance(req.caller) < req.value {
                return Err(Halt::revert(REASON_INSUFFICIENT_FUNDS));
            }
            let from = self.world.accounts.get_mut(&req.caller).expect("funded caller exists");
            from.balance -= req.value;
            let to = self.world.accounts.entry(req.storage_context).or_default();
            to.balance += req.value;
            self.record(TraceEvent::ValueTransfer {
                frame_id: id,
                from: req.caller,
                to: req.storage_context,
                amount: req.value,
            });
        }
        let Some(behavior) = self.world.behavior(req.code_address).cloned() else {
            return Ok(Vec::new());
        };
        if let Some(name) = behavior.layout_template() {
            self.tx.bindings.insert(req.storage_context, name.to_string());
        }
        let mut ctx = Ctx { vm: self, frame: id };
        behavior.execute(&mut ctx, &req.function, &req.args)
    }
}

/// Convenience wrapper matching the functional signature: the input world is
/// not modified.
pub fn execute_transaction(
    world: &WorldState,
    schedule: GasSchedule,
    tx: &Transaction,
) -> (WorldState, ExecutionTrace, ExecResult) {
    let mut vm = Vm::with_schedule(world.clone(), schedule);
    let (trace, result) = vm.execute(tx);
    (vm.world, trace, result)
}

/// The view a running behavior has of the machine.
pub struct Ctx<'a> {
    vm: &'a mut Vm,
    frame: u32,
}

impl Ctx<'_> {
    fn current(&self) -> &CallFrame {
        &self.vm.tx.frames[self.frame as usize]
    }

    pub fn frame_id(&self) -> u32 {
        self.frame
    }

    /// Storage context (`address(this)`).
    pub fn address(&self) -> Address {
        self.current().storage_context
    }

    pub fn code_address(&self) -> Address {
        self.current().code_address
    }

    pub fn caller(&self) -> Address {
        self.current().caller
    }

    pub fn value(&self) -> Word {
        self.current().value
    }

    pub fn is_static(&self) -> bool {
        self.current().static_flag
    }

    pub fn gas_left(&self) -> u64 {
        let f = self.current();
        f.gas_limit - f.gas_used
    }

    pub fn schedule(&self) -> GasSchedule {
        self.vm.schedule
    }

    pub fn charge(&mut self, gas: u64) -> Result<(), Halt> {
        let f = &mut self.vm.tx.frames[self.frame as usize];
        if f.gas_used + gas > f.gas_limit {
            return Err(Halt::OutOfGas);
        }
        f.gas_used += gas;
        Ok(())
    }

    pub fn balance(&self, address: Address) -> Word {
        self.vm.world.balance(address)
    }

    pub fn self_balance(&self) -> Word {
        self.vm.world.balance(self.address())
    }

    pub fn sload(&mut self, slot: Word) -> Result<Word, Halt> {
        let context = self.address();
        let warm = !self.vm.tx.warm_slots.insert((context, slot));
        self.charge(self.vm.schedule.sload(warm))?;
        let value = self.vm.world.load(context, slot);
        self.vm.record(TraceEvent::StorageRead { frame_id: self.frame, context, slot, value });
        Ok(value)
    }

    pub fn sstore(&mut self, slot: Word, value: Word) -> Result<(), Halt> {
        if self.is_static() {
            return Err(Halt::StaticViolation);
        }
        let context = self.address();
        let warm = !self.vm.tx.warm_slots.insert((context, slot));
        let old = self.vm.world.load(context, slot);
        let cost = self.vm.schedule.sstore(warm, !old.is_zero(), !value.is_zero(), old == value);
        self.charge(cost)?;
        self.vm.world.store(context, slot, value);
        self.vm.record(TraceEvent::StorageWrite { frame_id: self.frame, context, slot, old, new: value });
        Ok(())
    }

    /// Records the declared variable name of a slot in the current context.
    pub fn label(&mut self, slot: Word, name: &str) {
        let context = self.address();
        self.vm.tx.labels.entry((context, slot)).or_insert_with(|| name.to_string());
    }

    pub fn log(&mut self, topics: u8) -> Result<(), Halt> {
        if self.is_static() {
            return Err(Halt::StaticViolation);
        }
        self.charge(self.vm.schedule.log(topics))?;
        self.vm.record(TraceEvent::LogEmitted { frame_id: self.frame, topics });
        Ok(())
    }

    /// Sub-call. `gas = None` forwards everything left after the access charge.
    pub fn call(
        &mut self,
        kind: CallKind,
        target: Address,
        function: impl Into<FunctionId>,
        args: Vec<Word>,
        value: Word,
        gas: Option<u64>,
    ) -> Result<CallOutcome, Halt> {
        let schedule = self.vm.schedule;
        let warm = !self.vm.tx.warm_accounts.insert(target);
        let mut cost = schedule.account_access(warm);
        if kind == CallKind::RegularCall && !value.is_zero() {
            cost += schedule.value_transfer_surcharge;
        }
        self.charge(cost)?;
        let available = self.gas_left();
        let gas = gas.map_or(available, |g| g.min(available));
        let parent = self.current().clone();
        let req = match kind {
            CallKind::RegularCall | CallKind::StaticCall => FrameRequest {
                parent: Some(self.frame),
                kind,
                caller: parent.storage_context,
                code_address: target,
                storage_context: target,
                value,
                transfer: true,
                function: function.into(),
                args,
                gas,
                static_flag: parent.static_flag || kind == CallKind::StaticCall,
            },
            CallKind::DelegateCall => FrameRequest {
                parent: Some(self.frame),
                kind,
                caller: parent.caller,
                code_address: target,
                storage_context: parent.storage_context,
                value: parent.value,
                transfer: false,
                function: function.into(),
                args,
                gas,
                static_flag: parent.static_flag,
            },
        };
        Ok(self.run_child(req))
    }

    /// Plain value send to `to` with an empty function, forwarding all gas.
    pub fn send(&mut self, to: Address, amount: Word) -> Result<CallOutcome, Halt> {
        self.call(CallKind::RegularCall, to, "", Vec::new(), amount, None)
    }

    pub fn static_call(&mut self, target: Address, function: &str, args: Vec<Word>) -> Result<CallOutcome, Halt> {
        self.call(CallKind::StaticCall, target, function, args, Word::zero(), None)
    }

    /// Capped sub-call into the current code that attempts a log. Returns true
    /// iff the attempt failed, i.e. the frame runs under the static flag.
    pub fn probe_static(&mut self) -> Result<bool, Halt> {
        let cap = self.vm.schedule.probe_gas_cap;
        let gas = cap.min(self.gas_left());
        let parent = self.current().clone();
        let outcome = self.run_child(FrameRequest {
            parent: Some(self.frame),
            kind: CallKind::DelegateCall,
            caller: parent.caller,
            code_address: parent.code_address,
            storage_context: parent.storage_context,
            value: parent.value,
            transfer: false,
            function: PROBE_FUNCTION.into(),
            args: Vec::new(),
            gas,
            static_flag: parent.static_flag,
        });
        Ok(!outcome.success)
    }

    fn run_child(&mut self, req: FrameRequest) -> CallOutcome {
        let outcome = self.vm.run_frame(req);
        self.vm.tx.frames[self.frame as usize].gas_used += outcome.gas_used;
        outcome
    }
}
