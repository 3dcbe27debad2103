//! Helpers shared by the integration tests. The witness checker here is a
//! deliberately naive re-derivation from raw trace events; it shares no
//! code with the oracle beyond the trace types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use sentinel_core::behaviors::spec_for_template;
use sentinel_core::harness::ScenarioRun;
use sentinel_core::mcvm::{
    Address, CallKind, ExecResult, ExecutionTrace, FrameStatus, TraceEvent, Transaction, Vm, Word, WorldState,
};
use sentinel_core::oracle::{DetectionWitness, VulnClass};

#[derive(Debug, Clone)]
pub struct Frame {
    pub parent: Option<u32>,
    pub kind: CallKind,
    pub ctx: Address,
    pub function: String,
    pub is_static: bool,
    pub enter: u64,
    pub exit: u64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Access {
    pub frame: u32,
    pub time: u64,
    pub ctx: Address,
    pub slot: Word,
}

pub struct Naive {
    pub frames: BTreeMap<u32, Frame>,
    pub reads: Vec<Access>,
    pub writes: Vec<Access>,
}

impl Naive {
    pub fn new(trace: &ExecutionTrace) -> Self {
        let mut frames = BTreeMap::new();
        let mut reads = Vec::new();
        let mut writes = Vec::new();
        for r in &trace.events {
            match &r.event {
                TraceEvent::FrameEnter(info) => {
                    frames.insert(
                        info.frame_id,
                        Frame {
                            parent: info.parent,
                            kind: info.call_kind,
                            ctx: info.context,
                            function: info.function.as_str().to_string(),
                            is_static: info.static_flag,
                            enter: r.time,
                            exit: u64::MAX,
                            ok: false,
                        },
                    );
                }
                TraceEvent::FrameExit { frame_id, status, .. } => {
                    let f = frames.get_mut(frame_id).expect("exit of unknown frame");
                    f.exit = r.time;
                    f.ok = *status == FrameStatus::Success;
                }
                TraceEvent::StorageRead { frame_id, context, slot, .. } => {
                    reads.push(Access { frame: *frame_id, time: r.time, ctx: *context, slot: *slot })
                }
                TraceEvent::StorageWrite { frame_id, context, slot, .. } => {
                    writes.push(Access { frame: *frame_id, time: r.time, ctx: *context, slot: *slot })
                }
                _ => {}
            }
        }
        Naive { frames, reads, writes }
    }

    /// Nearest ancestor-or-self that is not a delegate frame.
    pub fn top(&self, mut id: u32) -> u32 {
        while self.frames[&id].kind == CallKind::DelegateCall {
            match self.frames[&id].parent {
                Some(p) => id = p,
                None => break,
            }
        }
        id
    }

    pub fn is_top(&self, id: u32) -> bool {
        self.top(id) == id
    }

    /// Frames strictly between `a` and its descendant `b`, outermost first.
    pub fn between(&self, a: u32, b: u32) -> Option<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = self.frames[&b].parent;
        while let Some(p) = cur {
            if p == a {
                out.reverse();
                return Some(out);
            }
            out.push(p);
            cur = self.frames[&p].parent;
        }
        None
    }

    fn all_ok(&self, ids: &[u32]) -> bool {
        ids.iter().all(|i| self.frames[i].ok)
    }

    /// Group `w` writes a slot that group `r` read earlier, after `after`.
    fn stale_write(&self, w: u32, r: u32, after: u64, admit: &dyn Fn(Word) -> bool) -> bool {
        self.writes.iter().filter(|x| self.top(x.frame) == w && x.time > after && admit(x.slot)).any(|x| {
            self.reads.iter().any(|y| self.top(y.frame) == r && y.slot == x.slot && y.ctx == x.ctx && y.time < x.time)
        })
    }

    /// Re-entry into the same context through a foreign frame, all successful.
    fn reentry(&self, a: u32, b: u32) -> bool {
        if a == b || !self.is_top(a) || !self.is_top(b) || self.frames[&a].ctx != self.frames[&b].ctx {
            return false;
        }
        let Some(path) = self.between(a, b) else { return false };
        let c = self.frames[&a].ctx;
        path.iter().any(|p| self.frames[p].ctx != c) && self.all_ok(&path) && self.all_ok(&[a, b])
    }

    /// Every (outer, inner) pair satisfying the class definition, by
    /// scanning all frame pairs.
    pub fn pairs(&self, trace: &ExecutionTrace, class: VulnClass) -> BTreeSet<(u32, u32)> {
        let ids: Vec<u32> = self.frames.keys().copied().collect();
        let mut out = BTreeSet::new();
        for &a in &ids {
            for &b in &ids {
                if self.holds(trace, class, a, b) {
                    out.insert((a, b));
                }
            }
        }
        out
    }

    pub fn holds(&self, trace: &ExecutionTrace, class: VulnClass, a: u32, b: u32) -> bool {
        let fa = &self.frames[&a];
        let fb = &self.frames[&b];
        match class {
            VulnClass::Sfr => {
                self.reentry(a, b) && fa.function == fb.function && self.stale_write(a, b, fb.enter, &|_| true)
            }
            VulnClass::Cfr => {
                if !self.reentry(a, b) || fa.function == fb.function {
                    return false;
                }
                let Some(spec) = trace.bindings.get(&fa.ctx).and_then(|t| spec_for_template(t)) else {
                    return false;
                };
                let (Some(s1), Some(s2)) =
                    (spec.functions.get(&fa.function.as_str().into()), spec.functions.get(&fb.function.as_str().into()))
                else {
                    return false;
                };
                let t1: BTreeSet<&String> = s1.reads.iter().chain(&s1.writes).collect();
                let t2: BTreeSet<&String> = s2.reads.iter().chain(&s2.writes).collect();
                let ctx = fa.ctx;
                let admit = |slot: Word| {
                    trace.labels.get(&(ctx, slot)).is_some_and(|n| t1.contains(n) && t2.contains(n))
                };
                self.stale_write(a, b, fb.enter, &admit)
            }
            VulnClass::Ccr => {
                let Some(x) = fa.parent else { return false };
                let cx = self.frames[&x].ctx;
                if cx == fa.ctx || !self.reentry(a, b) || !self.frames[&x].ok {
                    return false;
                }
                let path = self.between(a, b).unwrap();
                let first_foreign = path.iter().find(|p| self.frames[p].ctx != fa.ctx).unwrap();
                self.frames[first_foreign].ctx != cx && self.stale_write(a, b, fb.enter, &|_| true)
            }
            VulnClass::Ror => {
                if !fb.is_static || !self.is_top(a) || fa.ctx != fb.ctx || a == b {
                    return false;
                }
                let Some(path) = self.between(a, b) else { return false };
                if !path.iter().any(|p| self.frames[p].ctx != fa.ctx) || !self.all_ok(&path) || !self.all_ok(&[a, b]) {
                    return false;
                }
                self.reads.iter().filter(|r| r.frame == b).any(|r| {
                    self.writes.iter().any(|w| {
                        self.top(w.frame) == a && w.slot == r.slot && w.ctx == r.ctx && w.time > r.time && w.time <= fa.exit
                    })
                })
            }
        }
    }

    /// Checks a witness's own claims (times, slot, hop) against raw events.
    pub fn validate(&self, trace: &ExecutionTrace, w: &DetectionWitness) -> Result<(), String> {
        if !self.holds(trace, w.class, w.outer, w.inner) {
            return Err(format!("pair ({}, {}) does not satisfy {}", w.outer, w.inner, w.class));
        }
        let outer = &self.frames[&w.outer];
        if outer.ctx != w.context {
            return Err("context mismatch".into());
        }
        if w.times[0] != outer.enter || !(w.times[0] < w.times[1] && w.times[1] < w.times[2]) {
            return Err(format!("bad times {:?}", w.times));
        }
        let path = self.between(w.outer, w.inner).ok_or("inner not below outer")?;
        if !path.contains(&w.hop) || self.frames[&w.hop].ctx == w.context {
            return Err("hop is not a foreign frame on the path".into());
        }
        let read_by_inner = |r: &&Access| {
            r.time == w.times[1] && r.slot == w.slot && if w.class == VulnClass::Ror { r.frame == w.inner } else { self.top(r.frame) == w.inner }
        };
        if !self.reads.iter().any(|r| read_by_inner(&r)) {
            return Err("no matching read".into());
        }
        if !self.writes.iter().any(|x| x.time == w.times[2] && x.slot == w.slot && self.top(x.frame) == w.outer) {
            return Err("no matching write".into());
        }
        if w.class == VulnClass::Ccr {
            let x = w.entry.ok_or("missing entry frame")?;
            if outer.parent != Some(x) {
                return Err("entry is not the outer frame's parent".into());
            }
        }
        Ok(())
    }
}

/// Replays every transaction of a run from its deployed world, yielding
/// the world before and after each one along with a fresh result.
pub fn replay(run: &ScenarioRun) -> Vec<(Transaction, WorldState, WorldState, ExecutionTrace, ExecResult)> {
    let mut vm = Vm::new(run.deployed.clone());
    run.transactions
        .iter()
        .map(|(tx, _, _)| {
            let before = vm.world.clone();
            let (trace, result) = vm.execute(tx);
            (tx.clone(), before, vm.world.clone(), trace, result)
        })
        .collect()
}

/// Frame brackets nest, times strictly increase, and every enter exits.
pub fn brackets_balanced(trace: &ExecutionTrace) -> Result<(), String> {
    let mut stack: Vec<u32> = Vec::new();
    let mut last = 0;
    for r in &trace.events {
        if r.time <= last {
            return Err(format!("time {} not after {last}", r.time));
        }
        last = r.time;
        match &r.event {
            TraceEvent::FrameEnter(info) => {
                if info.parent != stack.last().copied() {
                    return Err(format!("frame {} entered under {:?}", info.frame_id, stack.last()));
                }
                stack.push(info.frame_id);
            }
            TraceEvent::FrameExit { frame_id, .. } => {
                if stack.pop() != Some(*frame_id) {
                    return Err(format!("frame {frame_id} exited out of order"));
                }
            }
            other => {
                if stack.last() != Some(&other.frame_id()) {
                    return Err(format!("event attributed to frame {} outside it", other.frame_id()));
                }
            }
        }
    }
    if stack.is_empty() { Ok(()) } else { Err(format!("unclosed frames {stack:?}")) }
}

/// No state-changing event inside a frame that runs under the static flag.
pub fn static_pure(trace: &ExecutionTrace) -> Result<(), String> {
    let statics: BTreeSet<u32> = trace
        .events
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::FrameEnter(info) if info.static_flag => Some(info.frame_id),
            _ => None,
        })
        .collect();
    for r in &trace.events {
        let changes = match &r.event {
            TraceEvent::StorageWrite { .. } | TraceEvent::LogEmitted { .. } => true,
            TraceEvent::ValueTransfer { amount, .. } => !amount.is_zero(),
            _ => false,
        };
        if changes && statics.contains(&r.event.frame_id()) {
            return Err(format!("state change at time {} under the static flag", r.time));
        }
    }
    Ok(())
}
