use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind, GuardAttachment, GuardedBehavior};
use crate::behaviors::{make_victim_bank, Behavior, Counter, KvStore, LedgerUpdate, Reader};
use crate::mcvm::{ether, Account, Address, FunctionId, Transaction, Vm, Word, WorldState};
use crate::sentinel::{self, GuardMode, ProxyParams};

const USER: u64 = 0x100;
const TARGET: u64 = 0x200;
const IMPLEMENTATION: u64 = 0x201;
const READER: u64 = 0x202;
const REGISTRY: u64 = 0x203;
const ADMIN: u64 = 0x204;
const DOMAIN: u64 = 9;

/// An implementation plus one honest state-changing call and one view.
#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub behavior: Behavior,
    pub function: FunctionId,
    pub value: Word,
    pub view: FunctionId,
}

impl Workload {
    pub fn new(name: &str, behavior: Behavior, function: &str, value: Word, view: &str) -> Self {
        Workload { name: name.into(), behavior, function: function.into(), value, view: view.into() }
    }
}

/// Implementations of increasing complexity used for overhead measurement.
pub fn standard_workloads() -> Vec<Workload> {
    vec![
        Workload::new("counter", Behavior::Counter(Counter), "increment", Word::zero(), "get"),
        Workload::new("kv_store_4", Behavior::KvStore(KvStore { width: 4 }), "bump", Word::zero(), "sum"),
        Workload::new("kv_store_16", Behavior::KvStore(KvStore { width: 16 }), "bump", Word::zero(), "sum"),
        Workload::new("bank", make_victim_bank(LedgerUpdate::ZeroAfterSend), "deposit", ether(1), "totalAssets"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deployment {
    Direct,
    Proxied(GuardMode),
    Baseline(BaselineKind),
}

fn world_for(w: &Workload, how: Deployment) -> WorldState {
    let mut world = WorldState::new();
    world.insert(Address::from_low_u64(USER), Account::with_balance(ether(1000)));
    world.insert(Address::from_low_u64(ADMIN), Account::with_balance(Word::zero()));
    let target = Address::from_low_u64(TARGET);
    match how {
        Deployment::Direct => world.insert(target, Account::with_behavior(w.behavior.clone(), Word::zero())),
        Deployment::Baseline(kind) => {
            let functions = w.behavior.spec().mutating_functions().into_iter().collect();
            let guarded = GuardedBehavior::attach(w.behavior.clone(), GuardAttachment { kind, functions })
                .expect("workload supports the guard");
            world.insert(target, Account::with_behavior(Behavior::Guarded(Box::new(guarded)), Word::zero()));
            baselines::init_guard_storage(&mut world, target, kind);
        }
        Deployment::Proxied(mode) => {
            let implementation = Address::from_low_u64(IMPLEMENTATION);
            let registry = Address::from_low_u64(REGISTRY);
            world.insert(implementation, Account::with_behavior(w.behavior.clone(), Word::zero()));
            sentinel::install_registry(&mut world, registry);
            sentinel::register_domain(&mut world, registry, Word::from(DOMAIN));
            let params = ProxyParams {
                implementation,
                mode,
                registry,
                domain: Word::from(DOMAIN),
                admin: Address::from_low_u64(ADMIN),
            };
            sentinel::install_proxy(&mut world, target, &params, Word::zero());
        }
    }
    let reader = Reader { target, function: w.view.clone() };
    world.insert(Address::from_low_u64(READER), Account::with_behavior(Behavior::Reader(reader), Word::zero()));
    world
}

/// Gas of the honest call and of a static view query through a reader.
fn measure(w: &Workload, how: Deployment) -> (u64, u64) {
    let user = Address::from_low_u64(USER);
    let mut vm = Vm::new(world_for(w, how));
    let call = Transaction::new(user, Address::from_low_u64(TARGET), w.function.clone()).value(w.value);
    let (_, r) = vm.execute(&call);
    assert!(r.success, "{} {:?}: {:?}", w.name, how, r.return_data);
    let mut vm = Vm::new(world_for(w, how));
    let (_, q) = vm.execute(&Transaction::new(user, Address::from_low_u64(READER), "query"));
    assert!(q.success, "{} {:?} view: {:?}", w.name, how, q.return_data);
    (r.gas_used, q.gas_used)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overhead {
    pub direct: u64,
    pub proxied: u64,
    pub overhead: u64,
    pub static_direct: u64,
    pub static_proxied: u64,
    pub static_overhead: u64,
}

/// Proxied minus direct gas, for the honest call and for a static query.
pub fn measure_gas_overhead(w: &Workload, mode: GuardMode) -> Overhead {
    let (direct, static_direct) = measure(w, Deployment::Direct);
    let (proxied, static_proxied) = measure(w, Deployment::Proxied(mode));
    Overhead {
        direct,
        proxied,
        overhead: proxied.saturating_sub(direct),
        static_direct,
        static_proxied,
        static_overhead: static_proxied.saturating_sub(static_direct),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasRow {
    pub template: String,
    pub optimized: Overhead,
    pub high_security: Overhead,
    pub counter_guard: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_delta_guard: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasReport {
    pub rows: Vec<GasRow>,
    pub counter_range: (u64, u64),
    pub balance_delta_range: Option<(u64, u64)>,
}

fn range(values: impl IntoIterator<Item = u64>) -> Option<(u64, u64)> {
    values.into_iter().fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

pub fn gas_report(workloads: &[Workload]) -> GasReport {
    let rows: Vec<GasRow> = workloads
        .iter()
        .map(|w| {
            let (direct, _) = measure(w, Deployment::Direct);
            let counter = measure(w, Deployment::Baseline(BaselineKind::Counter)).0 - direct;
            let delta = w
                .behavior
                .spec()
                .ledger
                .is_some()
                .then(|| measure(w, Deployment::Baseline(BaselineKind::BalanceDelta)).0 - direct);
            GasRow {
                template: w.name.clone(),
                optimized: measure_gas_overhead(w, GuardMode::Optimized),
                high_security: measure_gas_overhead(w, GuardMode::HighSecurity),
                counter_guard: counter,
                balance_delta_guard: delta,
            }
        })
        .collect();
    GasReport {
        counter_range: range(rows.iter().map(|r| r.counter_guard)).unwrap_or_default(),
        balance_delta_range: range(rows.iter().filter_map(|r| r.balance_delta_guard)),
        rows,
    }
}

impl GasReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<14}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}\n",
            "template", "optimized", "high-sec", "static", "static-hs", "counter", "bal-delta"
        );
        for r in &self.rows {
            let delta = r.balance_delta_guard.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "{:<14}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}",
                r.template,
                r.optimized.overhead,
                r.high_security.overhead,
                r.optimized.static_overhead,
                r.high_security.static_overhead,
                r.counter_guard,
                delta
            )
            .unwrap();
        }
        writeln!(out, "counter guard overhead range: {}..{}", self.counter_range.0, self.counter_range.1).unwrap();
        if let Some((lo, hi)) = self.balance_delta_range {
            writeln!(out, "balance-delta guard overhead range: {lo}..{hi}").unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
