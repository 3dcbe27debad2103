mod common;

use std::collections::BTreeMap;

use common::Naive;
use sentinel_core::behaviors::{make_victim_bank, BehaviorSpec, LedgerUpdate};
use sentinel_core::harness::{
    cei_safe_variant, generate_corpus, honest_flow, run_scenario, GuardKind, RunOptions, Scenario, ScenarioRun,
    DEFAULT_SEED,
};
use sentinel_core::mcvm::{ether, Account, Address, ExecutionTrace, Transaction, Vm, Word, WorldState};
use sentinel_core::oracle::{
    check_atomicity, detect, detect_all, detect_ccr, detect_cfr, detect_cfr_with, detect_ror, detect_sfr,
    shared_state, OracleError, VulnClass,
};

fn corpus() -> Vec<Scenario> {
    generate_corpus(DEFAULT_SEED)
}

fn first(pred: impl Fn(&Scenario) -> bool) -> Scenario {
    corpus().into_iter().find(pred).expect("corpus has such a scenario")
}

fn run(s: &Scenario, guard: GuardKind) -> ScenarioRun {
    run_scenario(s, &RunOptions { guard: Some(guard), ..Default::default() }).unwrap()
}

#[test]
fn shared_state_follows_declared_variables() {
    let bank = make_victim_bank(LedgerUpdate::ZeroAfterSend).spec();
    assert!(shared_state(&bank, &"withdraw".into(), &"transfer".into()).unwrap());
    assert!(shared_state(&bank, &"deposit".into(), &"deposit".into()).unwrap());
    let spec = BehaviorSpec::new("t").function("deposit", &["a"], &["a"]).view("peek", &["b"]).view("idle", &[]);
    assert!(!shared_state(&spec, &"deposit".into(), &"peek".into()).unwrap());
    assert!(!shared_state(&spec, &"idle".into(), &"idle".into()).unwrap());
    assert!(matches!(shared_state(&spec, &"deposit".into(), &"nope".into()), Err(OracleError::NoSuchFunction(_))));
}

#[test]
fn empty_trace_has_no_witnesses() {
    assert!(detect_all(&ExecutionTrace::default()).unwrap().is_empty());
}

#[test]
fn sfr_exploit_cites_two_withdraw_frames() {
    let s = first(|s| s.category == VulnClass::Sfr);
    let r = run(&s, GuardKind::None);
    let ws = detect_sfr(&r.attack_trace).unwrap();
    assert!(!ws.is_empty());
    let frames = r.attack_trace.frames().unwrap();
    for w in &ws {
        assert_eq!(frames[&w.outer].info.function.as_str(), "withdraw");
        assert_eq!(frames[&w.inner].info.function.as_str(), "withdraw");
        assert!(w.times[0] < w.times[1] && w.times[1] < w.times[2]);
    }
    assert!(detect_ccr(&r.attack_trace).unwrap().is_empty(), "one contract cannot give a cross-contract witness");
    let cei = run(&cei_safe_variant(&s), GuardKind::None);
    assert!(detect_sfr(&cei.attack_trace).unwrap().is_empty());
}

#[test]
fn cfr_exploit_detected_and_honest_flow_clean() {
    let s = first(|s| s.category == VulnClass::Cfr && !s.read_only);
    let r = run(&s, GuardKind::None);
    assert!(!detect_cfr(&r.attack_trace).unwrap().is_empty());
    let honest = run(&honest_flow(&s), GuardKind::None);
    for (_, t, _) in &honest.transactions {
        assert!(detect_cfr(t).unwrap().is_empty());
    }
}

#[test]
fn cfr_needs_shared_variables() {
    let s = first(|s| s.category == VulnClass::Cfr && !s.read_only);
    let r = run(&s, GuardKind::None);
    // the same trace judged against a layout where the two functions touch
    // disjoint variables
    let disjoint = BehaviorSpec::new("bank")
        .function("deposit", &["x"], &["x"])
        .function("withdraw", &["y"], &["y"])
        .function("transfer", &["z"], &["z"])
        .view("balanceOf", &["x"])
        .view("totalAssets", &["x"]);
    let specs = BTreeMap::from([("bank".to_string(), disjoint)]);
    assert!(detect_cfr_with(&r.attack_trace, &specs).unwrap().is_empty());
}

#[test]
fn ccr_exploit_detected_and_blocked_attempt_is_not() {
    let s = first(|s| s.category == VulnClass::Ccr && !s.read_only);
    let r = run(&s, GuardKind::None);
    let ws = detect_ccr(&r.attack_trace).unwrap();
    assert!(!ws.is_empty());
    assert!(ws.iter().all(|w| w.entry.is_some()));
    let guarded = run(&s, GuardKind::Sentinel);
    assert!(!guarded.attack_result.success);
    assert!(detect_ccr(&guarded.attack_trace).unwrap().is_empty());
}

#[test]
fn ror_exploit_detected_in_both_families() {
    for class in [VulnClass::Cfr, VulnClass::Ccr] {
        let s = first(|s| s.category == class && s.read_only);
        let r = run(&s, GuardKind::None);
        let ws = detect_ror(&r.attack_trace).unwrap();
        assert!(!ws.is_empty(), "{}", s.name);
        assert!(!detect(&r.attack_trace, class).unwrap().is_empty(), "{}", s.name);
        assert!(detect_ror(&run(&s, GuardKind::Sentinel).attack_trace).unwrap().is_empty());
    }
}

#[test]
fn exported_trace_gives_the_same_witnesses() {
    for s in corpus().iter().step_by(7) {
        let r = run(s, GuardKind::None);
        let text = r.attack_trace.to_ndjson();
        let back = ExecutionTrace::from_ndjson(&text).unwrap();
        assert_eq!(back, r.attack_trace);
        assert_eq!(detect_all(&back).unwrap(), detect_all(&r.attack_trace).unwrap());
        let cut = &text[..text.len() / 2];
        let truncated = ExecutionTrace::from_ndjson(cut);
        assert!(truncated.is_err(), "{}: half a trace parsed", s.name);
    }
}

#[test]
fn witnesses_agree_with_a_quadratic_scan_under_every_guard() {
    for s in &corpus() {
        for g in GuardKind::ALL {
            let r = run(s, g);
            let naive = Naive::new(&r.attack_trace);
            for class in VulnClass::ALL {
                for w in detect(&r.attack_trace, class).unwrap() {
                    naive.validate(&r.attack_trace, &w).unwrap_or_else(|e| panic!("{} {}: {w}: {e}", s.name, g.name()));
                }
            }
        }
    }
}

#[test]
fn atomicity_flags_writes_after_the_first_external_call() {
    let at = Address::from_low_u64(0xb);
    let user = Address::from_low_u64(0x1);
    for (update, expect) in [(LedgerUpdate::ZeroAfterSend, 1), (LedgerUpdate::ZeroBeforeSend, 0)] {
        let mut w = WorldState::new();
        w.insert(at, Account::with_behavior(make_victim_bank(update), Word::zero()));
        w.insert(user, Account::with_balance(ether(2)));
        let mut vm = Vm::new(w);
        vm.execute(&Transaction::new(user, at, "deposit").value(ether(1)));
        let (trace, r) = vm.execute(&Transaction::new(user, at, "withdraw"));
        assert!(r.success);
        let v = check_atomicity(&trace, at).unwrap();
        assert_eq!(v.len(), expect, "{update:?}: {v:?}");
    }
}
