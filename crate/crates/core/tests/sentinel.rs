use proptest::prelude::*;
use sha3::{Digest, Keccak256};

use sentinel_core::behaviors::{make_attacker_sfr, make_victim_bank, Behavior, Counter, LedgerUpdate, Reader};
use sentinel_core::mcvm::{ether, Account, Address, ExecResult, TraceEvent, Transaction, Vm, Word, WorldState};
use sentinel_core::sentinel::{
    self, derive_slot, proxy_state, registry_state, GuardMode, ProxyConfig, ProxyParams, ALLOWED,
    REASON_DOMAIN_LOCKED, REASON_NOT_ADMIN, REASON_NOT_LOCKER, REASON_OPTIMIZED, UNLOCKED,
};

const LABELS: [&str; 7] = [
    "sentinel.proxy.implementation",
    "sentinel.proxy.mode",
    "sentinel.proxy.lockStatus",
    "sentinel.proxy.staticCallAllowed",
    "sentinel.proxy.lockRegistry",
    "sentinel.proxy.domainId",
    "sentinel.proxy.admin",
];

fn reference_slot(label: &str) -> Word {
    Word::from_big_endian(&Keccak256::digest(label.as_bytes()))
}

fn a(n: u64) -> Address {
    Address::from_low_u64(n)
}

const USER: u64 = 0x10;
const ADMIN: u64 = 0x11;
const REGISTRY: u64 = 0x20;
const P: u64 = 0x30;
const Q: u64 = 0x31;
const READER: u64 = 0x32;
const DOMAIN: u64 = 4;

fn proxied(world: &mut WorldState, at: u64, implementation: u64, behavior: Behavior, mode: GuardMode) {
    world.insert(a(implementation), Account::with_behavior(behavior, Word::zero()));
    let params = ProxyParams {
        implementation: a(implementation),
        mode,
        registry: a(REGISTRY),
        domain: Word::from(DOMAIN),
        admin: a(ADMIN),
    };
    sentinel::install_proxy(world, a(at), &params, Word::zero());
}

fn base_world(mode: GuardMode) -> WorldState {
    let mut w = WorldState::new();
    w.insert(a(USER), Account::with_balance(ether(100)));
    w.insert(a(ADMIN), Account::with_balance(Word::zero()));
    sentinel::install_registry(&mut w, a(REGISTRY));
    sentinel::register_domain(&mut w, a(REGISTRY), Word::from(DOMAIN));
    proxied(&mut w, P, 0x40, Behavior::Counter(Counter), mode);
    proxied(&mut w, Q, 0x41, Behavior::Reader(Reader { target: a(P), function: "increment".into() }), mode);
    w.insert(a(READER), Account::with_behavior(Behavior::Reader(Reader { target: a(P), function: "get".into() }), Word::zero()));
    w
}

fn at_rest(w: &WorldState) -> bool {
    [P, Q].iter().all(|p| {
        let s = proxy_state(w, a(*p));
        s.lock_status == Word::from(UNLOCKED) && s.static_call_allowed == Word::from(ALLOWED)
    }) && {
        let r = registry_state(w, a(REGISTRY), Word::from(DOMAIN));
        !r.locked && r.locker.is_zero()
    }
}

fn exec(vm: &mut Vm, tx: Transaction) -> ExecResult {
    vm.execute(&tx).1
}

#[test]
fn slots_match_an_independent_keccak() {
    for l in LABELS {
        assert_eq!(derive_slot(l), reference_slot(l), "{l}");
    }
    let cfg = ProxyConfig::canonical();
    let slots = cfg.slots();
    for (i, l) in LABELS.iter().enumerate() {
        assert_eq!(slots[i], reference_slot(l));
    }
    let distinct: std::collections::BTreeSet<_> = slots.iter().collect();
    assert_eq!(distinct.len(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derive_slot_is_keccak_of_the_label(label in ".{0,80}") {
        prop_assert_eq!(derive_slot(&label), reference_slot(&label));
    }
}

#[test]
fn lock_is_released_between_transactions() {
    for mode in [GuardMode::Optimized, GuardMode::HighSecurity] {
        let mut vm = Vm::new(base_world(mode));
        for _ in 0..2 {
            assert!(exec(&mut vm, Transaction::new(a(USER), a(P), "increment")).success);
            assert!(at_rest(&vm.world));
        }
        let got = exec(&mut vm, Transaction::new(a(USER), a(P), "get")).return_data.unwrap();
        assert_eq!(got, vec![Word::from(2)]);
    }
}

#[test]
fn failing_implementation_rolls_the_lock_back() {
    for mode in [GuardMode::Optimized, GuardMode::HighSecurity] {
        let mut vm = Vm::new(base_world(mode));
        let before = vm.world.clone();
        let r = exec(&mut vm, Transaction::new(a(USER), a(P), "noSuchFunction"));
        assert!(!r.success);
        assert_eq!(vm.world, before);
        let r = exec(&mut vm, Transaction::new(a(USER), a(P), "increment").gas_limit(30_000));
        assert!(!r.success);
        assert_eq!(vm.world, before);
    }
}

#[test]
fn high_security_entry_locks_the_domain_and_unlock_clears_the_locker() {
    let mut vm = Vm::new(base_world(GuardMode::HighSecurity));
    let (trace, r) = vm.execute(&Transaction::new(a(USER), a(P), "increment"));
    assert!(r.success);
    let lock_write = trace.events.iter().any(|e| {
        matches!(&e.event, TraceEvent::StorageWrite { context, new, .. } if *context == a(REGISTRY) && *new == a(P).to_word())
    });
    assert!(lock_write, "locker recorded as the proxy");
    assert!(trace.events.iter().any(|e| matches!(e.event, TraceEvent::LogEmitted { topics: 1, .. })));
    assert!(registry_state(&vm.world, a(REGISTRY), Word::from(DOMAIN)).locker.is_zero());
}

#[test]
fn locker_may_enter_its_coupled_proxy() {
    // Q holds the domain lock and calls P directly: a nested entry
    let mut vm = Vm::new(base_world(GuardMode::HighSecurity));
    assert!(exec(&mut vm, Transaction::new(a(USER), a(Q), "poke")).success);
    assert!(at_rest(&vm.world));
}

#[test]
fn registry_protocol() {
    let mut w = WorldState::new();
    sentinel::install_registry(&mut w, a(REGISTRY));
    for u in [1, 2] {
        w.insert(a(u), Account::with_balance(Word::zero()));
    }
    let mut vm = Vm::new(w);
    let d = vec![Word::from(9)];
    let call = |f: &str| Transaction::new(a(1), a(REGISTRY), f).args(d.clone());
    assert!(exec(&mut vm, call("register")).success);
    assert_eq!(exec(&mut vm, call("isLocked")).return_data.unwrap(), vec![Word::zero()]);
    assert!(exec(&mut vm, call("lock")).success);
    assert_eq!(exec(&mut vm, call("isLocked")).return_data.unwrap(), vec![Word::one()]);
    assert_eq!(exec(&mut vm, call("isStaticAllowed")).return_data.unwrap(), vec![Word::zero()]);
    let other = |f: &str| Transaction::new(a(2), a(REGISTRY), f).args(d.clone());
    assert_eq!(exec(&mut vm, other("lock")).revert_reason(), Some(REASON_DOMAIN_LOCKED));
    assert_eq!(exec(&mut vm, call("lock")).revert_reason(), Some(REASON_DOMAIN_LOCKED));
    assert_eq!(exec(&mut vm, other("unlock")).revert_reason(), Some(REASON_NOT_LOCKER));
    assert!(exec(&mut vm, call("unlock")).success);
    assert_eq!(exec(&mut vm, call("lockerOf")).return_data.unwrap(), vec![Word::zero()]);
}

#[test]
fn upgrade_keeps_the_proxy_address_and_the_guard() {
    let mut w = WorldState::new();
    w.insert(a(USER), Account::with_balance(ether(20)));
    w.insert(a(ADMIN), Account::with_balance(Word::zero()));
    sentinel::install_registry(&mut w, a(REGISTRY));
    proxied(&mut w, P, 0x40, make_victim_bank(LedgerUpdate::ZeroAfterSend), GuardMode::Optimized);
    w.insert(a(0x41), Account::with_behavior(make_victim_bank(LedgerUpdate::ZeroBeforeSend), Word::zero()));
    w.insert(a(0x50), Account::with_behavior(make_attacker_sfr(a(P), Word::zero()), Word::zero()));
    let mut vm = Vm::new(w);
    assert!(exec(&mut vm, Transaction::new(a(USER), a(P), "deposit").value(ether(5))).success);

    let before = vm.world.clone();
    assert_eq!(exec(&mut vm, sentinel::upgrade_to(a(USER), a(P), a(0x41))).revert_reason(), Some(REASON_NOT_ADMIN));
    assert_eq!(vm.world, before);
    assert!(exec(&mut vm, sentinel::upgrade_to(a(ADMIN), a(P), a(0x41))).success);
    assert_eq!(proxy_state(&vm.world, a(P)).implementation, a(0x41));

    let (trace, r) = vm.execute(&Transaction::new(a(USER), a(0x50), "attack").value(ether(1)));
    assert!(!r.success);
    assert!(trace.events.iter().any(|e| matches!(&e.event, TraceEvent::FrameExit { reason: Some(x), .. } if x == REASON_OPTIMIZED)));
    assert!(exec(&mut vm, Transaction::new(a(USER), a(P), "withdraw")).success);
    assert_eq!(vm.world.balance(a(USER)), ether(20));
}

#[test]
fn switching_to_high_security_brings_in_the_registry() {
    let mut vm = Vm::new(base_world(GuardMode::Optimized));
    let touches_registry =
        |vm: &mut Vm| vm.execute(&Transaction::new(a(USER), a(P), "increment")).0.events.iter().any(|e| {
            matches!(&e.event, TraceEvent::FrameEnter(i) if i.code_address == a(REGISTRY))
        });
    assert!(!touches_registry(&mut vm));
    assert!(exec(&mut vm, sentinel::set_mode(a(ADMIN), a(P), GuardMode::HighSecurity)).success);
    assert!(touches_registry(&mut vm));
}

#[derive(Debug, Clone)]
enum Op {
    Increment(u64),
    Query,
    Nested,
    Get,
    SetMode(bool),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (20_000u64..400_000).prop_map(Op::Increment),
        Just(Op::Query),
        Just(Op::Nested),
        Just(Op::Get),
        any::<bool>().prop_map(Op::SetMode),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Whatever is sent, and whether it succeeds or runs out of gas, every
    /// transaction starts and ends with the guard at rest.
    #[test]
    fn guard_state_is_neutral_across_transactions(hs in any::<bool>(), ops in proptest::collection::vec(op(), 1..12)) {
        let mode = if hs { GuardMode::HighSecurity } else { GuardMode::Optimized };
        let mut vm = Vm::new(base_world(mode));
        for o in ops {
            let tx = match o {
                Op::Increment(gas) => Transaction::new(a(USER), a(P), "increment").gas_limit(gas),
                Op::Query => Transaction::new(a(USER), a(READER), "query"),
                Op::Nested => Transaction::new(a(USER), a(Q), "poke"),
                Op::Get => Transaction::new(a(USER), a(P), "get"),
                Op::SetMode(h) => sentinel::set_mode(
                    a(ADMIN), a(P), if h { GuardMode::HighSecurity } else { GuardMode::Optimized }),
            };
            let before = vm.world.clone();
            let (_, r) = vm.execute(&tx);
            prop_assert!(at_rest(&vm.world), "{:?} left the guard engaged", o);
            if !r.success {
                prop_assert_eq!(&vm.world, &before);
            }
        }
    }
}
