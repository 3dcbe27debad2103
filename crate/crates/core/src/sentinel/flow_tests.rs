use super::*;
use crate::behaviors::{make_attacker_sfr, make_victim_bank, Behavior, Counter, LedgerUpdate, Reader};
use crate::mcvm::{
    ether, execute_transaction, CallKind, FrameStatus, GasSchedule, TraceEvent, Transaction, Vm, PROBE_FUNCTION,
};

const ADMIN: u64 = 0xad;
const USER: u64 = 0x100;
const REGISTRY: u64 = 0x50;

fn a(n: u64) -> Address {
    Address::from_low_u64(n)
}

fn base_world() -> WorldState {
    let mut w = WorldState::new();
    w.insert(a(ADMIN), Account::with_balance(ether(10)));
    w.insert(a(USER), Account::with_balance(ether(100)));
    install_registry(&mut w, a(REGISTRY));
    w
}

fn proxy(w: &mut WorldState, at: u64, implementation: u64, mode: GuardMode, domain: u64) {
    let params = ProxyParams {
        implementation: a(implementation),
        mode,
        registry: a(REGISTRY),
        domain: Word::from(domain),
        admin: a(ADMIN),
    };
    install_proxy(w, a(at), &params, Word::zero());
    register_domain(w, a(REGISTRY), Word::from(domain));
}

fn counter_world(mode: GuardMode) -> WorldState {
    let mut w = base_world();
    w.insert(a(1), Account::with_behavior(Behavior::Counter(Counter), Word::zero()));
    proxy(&mut w, 10, 1, mode, 7);
    w
}

#[test]
fn optimized_honest_call_locks_then_restores() {
    let world = counter_world(GuardMode::Optimized);
    let cfg = ProxyConfig::canonical();
    let (post, trace, res) =
        execute_transaction(&world, GasSchedule::default(), &Transaction::new(a(USER), a(10), "increment"));
    assert!(res.success, "{res:?}");
    assert_eq!(post.load(a(10), Word::zero()), Word::one());
    let lock_write = trace
        .events
        .iter()
        .position(|r| matches!(&r.event, TraceEvent::StorageWrite { slot, new, .. } if *slot == cfg.lock_status_slot && *new == Word::from(LOCKED)))
        .expect("lock write");
    let delegate = trace
        .events
        .iter()
        .position(|r| matches!(&r.event, TraceEvent::FrameEnter(i) if i.call_kind == CallKind::DelegateCall && i.function.as_str() == "increment"))
        .expect("delegate enter");
    assert!(lock_write < delegate);
    let st = proxy_state(&post, a(10));
    assert_eq!(st.lock_status, Word::from(UNLOCKED));
    assert_eq!(st.static_call_allowed, Word::from(ALLOWED));
}

#[test]
fn sfr_attack_through_optimized_proxy_reverts() {
    let mut world = base_world();
    world.insert(a(1), Account::with_behavior(make_victim_bank(LedgerUpdate::ZeroAfterSend), Word::zero()));
    proxy(&mut world, 10, 1, GuardMode::Optimized, 7);
    world.insert(a(20), Account::with_behavior(make_attacker_sfr(a(10), ether(1)), Word::zero()));
    let mut vm = Vm::new(world);
    assert!(vm.execute(&Transaction::new(a(USER), a(10), "deposit").value(ether(10))).1.success);
    let before = vm.world.clone();
    let (_, res) = vm.execute(&Transaction::new(a(USER), a(20), "attack").value(ether(1)));
    assert!(!res.success);
    assert!(vm
        .last_frames()
        .iter()
        .any(|f| f.return_data == Some(Err(REASON_OPTIMIZED.to_string()))));
    assert_eq!(vm.world, before);
}

#[test]
fn probe_costs_one_log_outside_static_and_at_most_the_cap_inside() {
    let mut world = counter_world(GuardMode::Optimized);
    world.insert(a(2), Account::with_behavior(Behavior::Reader(Reader { target: a(10), function: "get".into() }), Word::zero()));
    let mut vm = Vm::new(world);
    vm.execute(&Transaction::new(a(USER), a(10), "get"));
    let probe = vm.last_frames().iter().find(|f| f.function.as_str() == PROBE_FUNCTION).unwrap();
    assert_eq!((probe.status, probe.gas_used), (FrameStatus::Success, 375));
    let (_, res) = vm.execute(&Transaction::new(a(USER), a(2), "query"));
    assert!(res.success);
    let probe = vm.last_frames().iter().find(|f| f.function.as_str() == PROBE_FUNCTION).unwrap();
    assert_eq!(probe.status, FrameStatus::Reverted);
    assert!(probe.gas_used <= 1000);
}

#[test]
fn static_query_without_lock_is_answered_without_writes() {
    let mut world = counter_world(GuardMode::Optimized);
    world.insert(a(2), Account::with_behavior(Behavior::Reader(Reader { target: a(10), function: "get".into() }), Word::zero()));
    let (_, trace, res) = execute_transaction(&world, GasSchedule::default(), &Transaction::new(a(USER), a(2), "query"));
    assert!(res.success);
    assert!(!trace.events.iter().any(|r| matches!(r.event, TraceEvent::StorageWrite { .. })));
}

#[test]
fn registry_protocol() {
    let mut world = base_world();
    register_domain(&mut world, a(REGISTRY), Word::from(3));
    let mut vm = Vm::new(world);
    let call = |f: &str, from: u64| Transaction::new(a(from), a(REGISTRY), f).args(vec![Word::from(3)]);
    assert!(vm.execute(&call("lock", USER)).1.success);
    let st = registry_state(&vm.world, a(REGISTRY), Word::from(3));
    assert!(st.locked && !st.static_allowed && st.locker == a(USER));
    assert_eq!(vm.execute(&call("isLocked", ADMIN)).1.return_data, Ok(vec![Word::one()]));
    assert_eq!(vm.execute(&call("isStaticAllowed", ADMIN)).1.return_data, Ok(vec![Word::zero()]));
    assert_eq!(vm.execute(&call("lock", ADMIN)).1.revert_reason(), Some(REASON_DOMAIN_LOCKED));
    assert_eq!(vm.execute(&call("unlock", ADMIN)).1.revert_reason(), Some(REASON_NOT_LOCKER));
    assert!(vm.execute(&call("unlock", USER)).1.success);
    let st = registry_state(&vm.world, a(REGISTRY), Word::from(3));
    assert!(!st.locked && st.static_allowed && st.locker.is_zero());
}

#[test]
fn admin_operations() {
    let mut world = counter_world(GuardMode::Optimized);
    world.insert(a(3), Account::with_behavior(Behavior::Counter(Counter), Word::zero()));
    let mut vm = Vm::new(world);
    let (_, res) = vm.execute(&upgrade_to(a(USER), a(10), a(3)));
    assert_eq!(res.revert_reason(), Some(REASON_NOT_ADMIN));
    assert_eq!(proxy_state(&vm.world, a(10)).implementation, a(1));
    assert!(vm.execute(&upgrade_to(a(ADMIN), a(10), a(3))).1.success);
    assert_eq!(proxy_state(&vm.world, a(10)).implementation, a(3));
    assert!(vm.execute(&set_mode(a(ADMIN), a(10), GuardMode::HighSecurity)).1.success);
    let (_, res) = vm.execute(&Transaction::new(a(USER), a(10), "increment"));
    assert!(res.success);
    assert!(vm.last_frames().iter().any(|f| f.code_address == a(REGISTRY) && f.function.as_str() == "lock"));
    let (trace, _) = vm.execute(&Transaction::new(a(USER), a(10), "increment"));
    assert!(trace.events.iter().any(|r| matches!(r.event, TraceEvent::LogEmitted { topics: LOCK_ACTIVATED_TOPICS, .. })));
    let st = registry_state(&vm.world, a(REGISTRY), Word::from(7));
    assert!(!st.locked && st.locker.is_zero());
}

#[test]
fn held_domain_lock_blocks_every_member_proxy() {
    let mut world = counter_world(GuardMode::HighSecurity);
    proxy(&mut world, 11, 1, GuardMode::HighSecurity, 7);
    proxy(&mut world, 12, 1, GuardMode::HighSecurity, 8);
    // domain 7 held through proxy 10
    world.store(a(REGISTRY), crate::hash::mapping_slot(Word::from(7), Word::zero()), STATUS_HELD);
    world.store(a(REGISTRY), crate::hash::mapping_slot(Word::from(7), Word::one()), a(10).to_word());
    let s = GasSchedule::default();
    let res = execute_transaction(&world, s, &Transaction::new(a(USER), a(11), "increment")).2;
    assert_eq!(res.revert_reason(), Some(REASON_HIGH_SECURITY));
    assert!(execute_transaction(&world, s, &Transaction::new(a(USER), a(12), "increment")).2.success);
}
