//! Trace predicates for the four reentrancy classes and a CEI linter.
//!
//! Frames are grouped by their nearest non-delegate ancestor (the group top):
//! a delegate frame executes on behalf of its caller, so its storage events
//! count as the caller's. "Own" events of a group are those emitted by its
//! frames, not by nested groups.
//!
//! A witness only cites frames that completed successfully along the whole
//! call path between them. Reverted frames leave no state behind, so a
//! re-entry that was rejected cannot have observed or produced stale state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::{spec_for_template, BehaviorSpec};
use crate::mcvm::{Address, CallKind, ExecutionTrace, FrameRecord, FrameStatus, FunctionId, TraceError, TraceEvent, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VulnClass {
    Sfr,
    Cfr,
    Ccr,
    Ror,
}

impl VulnClass {
    pub const ALL: [VulnClass; 4] = [VulnClass::Sfr, VulnClass::Cfr, VulnClass::Ccr, VulnClass::Ror];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnClass::Sfr => "SFR",
            VulnClass::Cfr => "CFR",
            VulnClass::Ccr => "CCR",
            VulnClass::Ror => "ROR",
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VulnClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SFR" => Ok(VulnClass::Sfr),
            "CFR" => Ok(VulnClass::Cfr),
            "CCR" => Ok(VulnClass::Ccr),
            "ROR" => Ok(VulnClass::Ror),
            _ => Err(format!("unknown class {s}")),
        }
    }
}

/// One instance of a class found in a trace.
///
/// For SFR/CFR/ROR `outer` is the open frame on the victim and `inner` the
/// re-entrant (or reading) frame; for CCR `outer` is the frame in the second
/// contract and `entry` its caller in the first. `times` are t1 < t2 < t3:
/// outer entry, the inner read of `slot`, the outer's later write of `slot`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionWitness {
    pub class: VulnClass,
    pub outer: u32,
    pub inner: u32,
    pub hop: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<u32>,
    pub context: Address,
    pub slot: Word,
    pub times: [u64; 3],
}

impl fmt::Display for DetectionWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} outer={} inner={} hop={}",
            self.class, self.outer, self.inner, self.hop
        )?;
        if let Some(entry) = self.entry {
            write!(f, " entry={entry}")?;
        }
        write!(
            f,
            " context={} slot={:#x} t=({}, {}, {})",
            self.context, self.slot, self.times[0], self.times[1], self.times[2]
        )
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("no such function {0}")]
    NoSuchFunction(String),
    #[error("no spec for template {0}")]
    NoSpec(String),
}

/// True iff some variable is read or modified by both functions.
pub fn shared_state(spec: &BehaviorSpec, f1: &FunctionId, f2: &FunctionId) -> Result<bool, OracleError> {
    for f in [f1, f2] {
        if !spec.functions.contains_key(f) {
            return Err(OracleError::NoSuchFunction(f.to_string()));
        }
    }
    Ok(!spec.shared_state(f1, f2).is_empty())
}

#[derive(Debug, Clone, Copy)]
struct Access {
    time: u64,
    slot: Word,
}

/// Frame tree plus per-group storage accesses.
struct Analysis {
    frames: BTreeMap<u32, FrameRecord>,
    top: BTreeMap<u32, u32>,
    reads: BTreeMap<u32, Vec<Access>>,
    writes: BTreeMap<u32, Vec<Access>>,
    static_reads: Vec<(u32, Access)>,
}

impl Analysis {
    fn new(trace: &ExecutionTrace) -> Result<Self, TraceError> {
        let frames = trace.frames()?;
        let mut top = BTreeMap::new();
        // parents always have smaller ids than children
        for (id, f) in &frames {
            let t = match (f.info.call_kind, f.info.parent) {
                (CallKind::DelegateCall, Some(p)) => top[&p],
                _ => *id,
            };
            top.insert(*id, t);
        }
        let mut reads: BTreeMap<u32, Vec<Access>> = BTreeMap::new();
        let mut writes: BTreeMap<u32, Vec<Access>> = BTreeMap::new();
        let mut static_reads = Vec::new();
        for rec in &trace.events {
            match &rec.event {
                TraceEvent::StorageRead { frame_id, slot, .. } => {
                    let access = Access { time: rec.time, slot: *slot };
                    reads.entry(top[frame_id]).or_default().push(access);
                    if frames[frame_id].info.static_flag {
                        static_reads.push((*frame_id, access));
                    }
                }
                TraceEvent::StorageWrite { frame_id, slot, .. } => {
                    writes.entry(top[frame_id]).or_default().push(Access { time: rec.time, slot: *slot });
                }
                _ => {}
            }
        }
        Ok(Analysis { frames, top, reads, writes, static_reads })
    }

    fn ctx(&self, id: u32) -> Address {
        self.frames[&id].info.context
    }

    fn function(&self, id: u32) -> FunctionId {
        let f = &self.frames[&id].info.function;
        if f.is_empty() {
            FunctionId::new("receive")
        } else {
            f.clone()
        }
    }

    fn group_tops(&self) -> impl Iterator<Item = u32> + '_ {
        self.top.iter().filter(|(id, t)| id == t).map(|(id, _)| *id)
    }

    /// Frames strictly between `ancestor` and `descendant`, outermost first,
    /// or None if `descendant` is not below `ancestor`.
    fn path(&self, ancestor: u32, descendant: u32) -> Option<Vec<u32>> {
        let mut path = Vec::new();
        let mut cur = self.frames[&descendant].info.parent;
        while let Some(id) = cur {
            if id == ancestor {
                path.reverse();
                return Some(path);
            }
            path.push(id);
            cur = self.frames[&id].info.parent;
        }
        None
    }

    fn succeeded(&self, ids: impl IntoIterator<Item = u32>) -> bool {
        ids.into_iter().all(|id| self.frames[&id].status == FrameStatus::Success)
    }

    /// First own write of group `writer` after `after` to a slot that group
    /// `reader` read; returns (read time, write time, slot).
    fn pending_write(
        &self,
        writer: u32,
        reader: u32,
        after: u64,
        admit: &dyn Fn(Word) -> bool,
    ) -> Option<(u64, u64, Word)> {
        let reads = self.reads.get(&reader)?;
        self.writes.get(&writer)?.iter().filter(|w| w.time > after && admit(w.slot)).find_map(|w| {
            reads
                .iter()
                .find(|r| r.slot == w.slot && r.time < w.time)
                .map(|r| (r.time, w.time, w.slot))
        })
    }

    /// Re-entry pairs: group tops `a`, `b` on the same context with `b`
    /// below `a`, reached through a frame on another context, all successful.
    fn reentries(&self) -> Vec<(u32, u32, u32)> {
        let tops: Vec<u32> = self.group_tops().collect();
        let mut out = Vec::new();
        for &a in &tops {
            for &b in &tops {
                if a == b || self.ctx(a) != self.ctx(b) {
                    continue;
                }
                let Some(path) = self.path(a, b) else { continue };
                let c = self.ctx(a);
                let Some(hop) = path.iter().copied().find(|&p| self.ctx(p) != c) else { continue };
                if self.succeeded(path.iter().copied().chain([a, b])) {
                    out.push((a, b, hop));
                }
            }
        }
        out
    }
}

pub fn detect_sfr(trace: &ExecutionTrace) -> Result<Vec<DetectionWitness>, OracleError> {
    let an = Analysis::new(trace)?;
    let mut out = Vec::new();
    for (a, b, hop) in an.reentries() {
        if an.function(a) != an.function(b) {
            continue;
        }
        if let Some((t2, t3, slot)) = an.pending_write(a, b, an.frames[&b].enter_time, &|_| true) {
            out.push(DetectionWitness {
                class: VulnClass::Sfr,
                outer: a,
                inner: b,
                hop,
                entry: None,
                context: an.ctx(a),
                slot,
                times: [an.frames[&a].enter_time, t2, t3],
            });
        }
    }
    Ok(out)
}

fn spec_of(trace: &ExecutionTrace, ctx: Address, specs: &BTreeMap<String, BehaviorSpec>) -> Option<BehaviorSpec> {
    let template = trace.bindings.get(&ctx)?;
    specs.get(template).cloned().or_else(|| spec_for_template(template))
}

/// Cross-function detection. `specs` overrides the registered template specs.
pub fn detect_cfr_with(
    trace: &ExecutionTrace,
    specs: &BTreeMap<String, BehaviorSpec>,
) -> Result<Vec<DetectionWitness>, OracleError> {
    let an = Analysis::new(trace)?;
    let mut out = Vec::new();
    for (a, b, hop) in an.reentries() {
        let (f1, f2) = (an.function(a), an.function(b));
        if f1 == f2 {
            continue;
        }
        let ctx = an.ctx(a);
        let spec = spec_of(trace, ctx, specs)
            .ok_or_else(|| OracleError::NoSpec(trace.bindings.get(&ctx).cloned().unwrap_or_else(|| ctx.to_string())))?;
        // functions the proxy serves itself are not part of the layout spec
        if !spec.functions.contains_key(&f1) || !spec.functions.contains_key(&f2) {
            continue;
        }
        let shared = spec.shared_state(&f1, &f2);
        let admit = |slot: Word| trace.labels.get(&(ctx, slot)).is_some_and(|name| shared.contains(name));
        if let Some((t2, t3, slot)) = an.pending_write(a, b, an.frames[&b].enter_time, &admit) {
            out.push(DetectionWitness {
                class: VulnClass::Cfr,
                outer: a,
                inner: b,
                hop,
                entry: None,
                context: ctx,
                slot,
                times: [an.frames[&a].enter_time, t2, t3],
            });
        }
    }
    Ok(out)
}

pub fn detect_cfr(trace: &ExecutionTrace) -> Result<Vec<DetectionWitness>, OracleError> {
    detect_cfr_with(trace, &BTreeMap::new())
}

pub fn detect_ccr(trace: &ExecutionTrace) -> Result<Vec<DetectionWitness>, OracleError> {
    let an = Analysis::new(trace)?;
    let tops: Vec<u32> = an.group_tops().collect();
    let mut out = Vec::new();
    for &b in &tops {
        let Some(x) = an.frames[&b].info.parent else { continue };
        let (c_first, c_second) = (an.ctx(x), an.ctx(b));
        if c_first == c_second {
            continue;
        }
        for &c in &tops {
            if c == b || an.ctx(c) != c_second {
                continue;
            }
            let Some(path) = an.path(b, c) else { continue };
            let Some(hop) = path.iter().copied().find(|&p| an.ctx(p) != c_second) else { continue };
            if an.ctx(hop) == c_first || !an.succeeded(path.iter().copied().chain([x, b, c])) {
                continue;
            }
            if let Some((t2, t3, slot)) = an.pending_write(b, c, an.frames[&c].enter_time, &|_| true) {
                out.push(DetectionWitness {
                    class: VulnClass::Ccr,
                    outer: b,
                    inner: c,
                    hop,
                    entry: Some(x),
                    context: c_second,
                    slot,
                    times: [an.frames[&b].enter_time, t2, t3],
                });
            }
        }
    }
    Ok(out)
}

pub fn detect_ror(trace: &ExecutionTrace) -> Result<Vec<DetectionWitness>, OracleError> {
    let an = Analysis::new(trace)?;
    let mut out = Vec::new();
    for &(reader, read) in &an.static_reads {
        let ctx = an.ctx(reader);
        let mut cur = an.frames[&reader].info.parent;
        while let Some(a) = cur {
            cur = an.frames[&a].info.parent;
            if an.top[&a] != a || an.ctx(a) != ctx {
                continue;
            }
            let Some(path) = an.path(a, reader) else { continue };
            let Some(hop) = path.iter().copied().find(|&p| an.ctx(p) != ctx) else { continue };
            if !an.succeeded(path.iter().copied().chain([a, reader])) {
                continue;
            }
            let exit = an.frames[&a].exit_time;
            let write = an.writes.get(&a).and_then(|ws| {
                ws.iter().find(|w| w.slot == read.slot && w.time > read.time && w.time <= exit)
            });
            if let Some(w) = write {
                out.push(DetectionWitness {
                    class: VulnClass::Ror,
                    outer: a,
                    inner: reader,
                    hop,
                    entry: None,
                    context: ctx,
                    slot: read.slot,
                    times: [an.frames[&a].enter_time, read.time, w.time],
                });
            }
        }
    }
    Ok(out)
}

pub fn detect(trace: &ExecutionTrace, class: VulnClass) -> Result<Vec<DetectionWitness>, OracleError> {
    match class {
        VulnClass::Sfr => detect_sfr(trace),
        VulnClass::Cfr => detect_cfr(trace),
        VulnClass::Ccr => detect_ccr(trace),
        VulnClass::Ror => detect_ror(trace),
    }
}

/// Runs all four detectors.
pub fn detect_all(trace: &ExecutionTrace) -> Result<Vec<DetectionWitness>, OracleError> {
    let mut all = Vec::new();
    for class in VulnClass::ALL {
        all.extend(detect(trace, class)?);
    }
    Ok(all)
}

/// A state write after the writing frame's first outgoing call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicityViolation {
    pub frame: u32,
    pub function: FunctionId,
    pub call_frame: u32,
    pub slot: Word,
    pub write_time: u64,
}

pub fn check_atomicity(trace: &ExecutionTrace, contract: Address) -> Result<Vec<AtomicityViolation>, OracleError> {
    let an = Analysis::new(trace)?;
    let mut out = Vec::new();
    for g in an.group_tops().filter(|&g| an.ctx(g) == contract).collect::<Vec<_>>() {
        let first_call = an
            .frames
            .values()
            .filter(|f| {
                f.info.call_kind != CallKind::DelegateCall && f.info.parent.is_some_and(|p| an.top[&p] == g)
            })
            .min_by_key(|f| f.enter_time);
        let Some(call) = first_call else { continue };
        for w in an.writes.get(&g).into_iter().flatten().filter(|w| w.time > call.exit_time) {
            out.push(AtomicityViolation {
                frame: g,
                function: an.function(g),
                call_frame: call.info.frame_id,
                slot: w.slot,
                write_time: w.time,
            });
        }
    }
    Ok(out)
}

/// A labeled storage access that the template's spec does not declare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecViolation {
    pub frame: u32,
    pub template: String,
    pub function: FunctionId,
    pub variable: String,
    pub write: bool,
}

/// Checks every labeled read and write against the declared sets of the
/// function that owns it.
pub fn check_spec_soundness(trace: &ExecutionTrace) -> Result<Vec<SpecViolation>, OracleError> {
    let an = Analysis::new(trace)?;
    let mut out = BTreeSet::new();
    for (group, accesses, write) in an
        .reads
        .iter()
        .map(|(g, a)| (*g, a, false))
        .chain(an.writes.iter().map(|(g, a)| (*g, a, true)))
    {
        let ctx = an.ctx(group);
        let Some(template) = trace.bindings.get(&ctx) else { continue };
        let spec = spec_for_template(template).ok_or_else(|| OracleError::NoSpec(template.clone()))?;
        let function = an.function(group);
        let declared = if write { spec.writes(&function) } else { spec.reads(&function) };
        for access in accesses {
            if let Some(variable) = trace.labels.get(&(ctx, access.slot)) {
                if !declared.contains(variable) {
                    out.insert((group, template.clone(), function.clone(), variable.clone(), write));
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|(frame, template, function, variable, write)| SpecViolation { frame, template, function, variable, write })
        .collect())
}
