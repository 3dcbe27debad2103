use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scenario::{ContractDecl, GuardConfig, Scenario, TxDecl};
use super::HarnessError;
use crate::baselines::{self, BaselineKind, GuardAttachment, GuardedBehavior};
use crate::behaviors::{instantiate, spec_for_template, storage::Ledger, Behavior};
use crate::mcvm::{
    word, Account, Address, ExecResult, ExecutionTrace, FrameStatus, FunctionId, Transaction, Vm, Word, WorldState,
    PROBE_FUNCTION,
};
use crate::oracle::VulnClass;
use crate::sentinel::{self, GuardMode, ProxyParams};

pub const REGISTRY_ADDRESS: u64 = 0x3000;
pub const ADMIN_ADDRESS: u64 = 0x3001;
const ROLE_BASE: u64 = 0x1000;
const IMPL_BASE: u64 = 0x2000;
const UPGRADE_BASE: u64 = 0x2800;
/// Domain shared by every proxy of a cross-contract scenario.
pub const SHARED_DOMAIN: u64 = 1;

/// Revert reasons that mean a guard rejected the call.
pub const GUARD_REASONS: [&str; 5] = [
    sentinel::REASON_OPTIMIZED,
    sentinel::REASON_HIGH_SECURITY,
    sentinel::REASON_STATIC,
    baselines::REASON_REENTRANT,
    baselines::REASON_BALANCE_INVARIANT,
];

/// A guard applied uniformly to every protected contract of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardKind {
    None,
    Counter,
    BalanceDelta,
    Sentinel,
}

impl GuardKind {
    pub const ALL: [GuardKind; 4] = [GuardKind::None, GuardKind::Counter, GuardKind::BalanceDelta, GuardKind::Sentinel];

    pub fn name(self) -> &'static str {
        match self {
            GuardKind::None => "none",
            GuardKind::Counter => "counter",
            GuardKind::BalanceDelta => "balance-delta",
            GuardKind::Sentinel => "sentinel",
        }
    }
}

impl std::str::FromStr for GuardKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GuardKind::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| format!("unknown guard {s}"))
    }
}

/// Sentinel mode the harness uses for a category when none is forced.
pub fn default_mode(category: VulnClass) -> GuardMode {
    match category {
        VulnClass::Ccr => GuardMode::HighSecurity,
        _ => GuardMode::Optimized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Replaces every protected contract's guard.
    pub guard: Option<GuardKind>,
    /// Forces the Sentinel mode instead of the per-category default.
    pub mode: Option<GuardMode>,
    /// Before the attack, upgrade every proxy to a fresh copy of its implementation.
    pub upgrade_before_attack: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Exploited,
    Protected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Attacker-side balance change over the attack and settlement, in wei.
    /// Serialized as a decimal string since it can exceed 64 bits.
    #[serde(with = "decimal")]
    pub net_gain: i128,
    pub ledger_broken: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revert_reason: Option<String>,
}

mod decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &i128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i128, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl Verdict {
    pub fn is_protected(&self) -> bool {
        self.outcome == Outcome::Protected
    }
}

/// Everything observed while running one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub verdict: Verdict,
    pub attack_trace: ExecutionTrace,
    pub attack_result: ExecResult,
    /// World right after deployment, before any transaction.
    pub deployed: WorldState,
    /// World right before the attack transaction.
    pub pre_attack: WorldState,
    /// World right after the attack transaction.
    pub post_attack: WorldState,
    pub final_world: WorldState,
    pub roles: BTreeMap<String, Address>,
    /// Proxy addresses with their implementation addresses.
    pub proxies: BTreeMap<Address, Address>,
    pub guards: BTreeMap<String, GuardConfig>,
    /// Every transaction executed, with its trace, in order.
    pub transactions: Vec<(Transaction, ExecutionTrace, ExecResult)>,
}

impl ScenarioRun {
    pub fn attack_gas(&self) -> u64 {
        self.attack_result.gas_used
    }

    /// Largest gas charge of a probe frame that detected a static context.
    pub fn max_static_probe_gas(&self) -> Option<u64> {
        self.transactions
            .iter()
            .flat_map(|(_, trace, _)| trace.frames().ok().into_iter().flat_map(|f| f.into_values()))
            .filter(|f| f.info.function.as_str() == PROBE_FUNCTION && f.status == FrameStatus::Reverted)
            .map(|f| f.gas_used)
            .max()
    }
}

/// Resolves each contract's guard after applying the run options.
pub fn effective_guards(scenario: &Scenario, opts: &RunOptions) -> BTreeMap<String, GuardConfig> {
    let mode = opts.mode.unwrap_or_else(|| default_mode(scenario.category));
    scenario
        .contracts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let has_ledger = spec_for_template(&c.template).is_some_and(|s| s.ledger.is_some());
            let guard = match opts.guard {
                Some(_) if !c.protect => GuardConfig::None,
                None => c.guard,
                Some(GuardKind::None) => GuardConfig::None,
                Some(GuardKind::Counter) => GuardConfig::Counter,
                Some(GuardKind::BalanceDelta) if has_ledger => GuardConfig::BalanceDelta,
                Some(GuardKind::BalanceDelta) => GuardConfig::None,
                Some(GuardKind::Sentinel) => GuardConfig::Sentinel {
                    mode,
                    domain: if scenario.category == VulnClass::Ccr { SHARED_DOMAIN } else { 100 + i as u64 },
                },
            };
            (c.role.clone(), guard)
        })
        .collect()
}

fn role_addresses(scenario: &Scenario) -> BTreeMap<String, Address> {
    scenario
        .roles()
        .enumerate()
        .map(|(i, r)| (r.to_string(), Address::from_low_u64(ROLE_BASE + i as u64)))
        .collect()
}

fn attachment(decl: &ContractDecl, kind: BaselineKind) -> GuardAttachment {
    let functions: BTreeSet<FunctionId> = match &decl.guarded_functions {
        Some(list) => list.iter().map(|f| FunctionId::new(f.as_str())).collect(),
        None => spec_for_template(&decl.template).map(|s| s.mutating_functions().into_iter().collect()).unwrap_or_default(),
    };
    GuardAttachment { kind, functions }
}

struct Deployment {
    world: WorldState,
    proxies: BTreeMap<Address, Address>,
    behaviors: BTreeMap<Address, Behavior>,
}

fn deploy(
    scenario: &Scenario,
    roles: &BTreeMap<String, Address>,
    guards: &BTreeMap<String, GuardConfig>,
) -> Result<Deployment, HarnessError> {
    let mut world = WorldState::new();
    let mut proxies = BTreeMap::new();
    let mut behaviors = BTreeMap::new();
    world.insert(Address::from_low_u64(ADMIN_ADDRESS), Account::with_balance(Word::zero()));
    sentinel::install_registry(&mut world, Address::from_low_u64(REGISTRY_ADDRESS));
    let resolve = |r: &str| roles.get(r).copied();
    for (i, c) in scenario.contracts.iter().enumerate() {
        let at = roles[&c.role];
        let mut behavior = instantiate(&c.template, &c.params, &resolve)?;
        let guard = guards[&c.role];
        let kind = match guard {
            GuardConfig::Counter => Some(BaselineKind::Counter),
            GuardConfig::BalanceDelta => Some(BaselineKind::BalanceDelta),
            _ => None,
        };
        if let Some(kind) = kind {
            behavior = Behavior::Guarded(Box::new(GuardedBehavior::attach(behavior, attachment(c, kind))?));
        }
        let funding = word(c.funding);
        match guard {
            GuardConfig::Sentinel { mode, domain } => {
                let implementation = Address::from_low_u64(IMPL_BASE + i as u64);
                world.insert(implementation, Account::with_behavior(behavior.clone(), Word::zero()));
                let registry = Address::from_low_u64(REGISTRY_ADDRESS);
                let params = ProxyParams {
                    implementation,
                    mode,
                    registry,
                    domain: Word::from(domain),
                    admin: Address::from_low_u64(ADMIN_ADDRESS),
                };
                sentinel::install_proxy(&mut world, at, &params, funding);
                sentinel::register_domain(&mut world, registry, Word::from(domain));
                proxies.insert(at, implementation);
            }
            _ => {
                world.insert(at, Account::with_behavior(behavior.clone(), funding));
                if let Some(kind) = kind {
                    baselines::init_guard_storage(&mut world, at, kind);
                }
            }
        }
        behaviors.insert(at, behavior);
    }
    for e in &scenario.eoas {
        world.insert(roles[&e.role], Account::with_balance(word(e.balance)));
    }
    Ok(Deployment { world, proxies, behaviors })
}

fn build_tx(decl: &TxDecl, roles: &BTreeMap<String, Address>) -> Transaction {
    let args = decl
        .args
        .iter()
        .map(|a| a.parse::<u128>().map(Word::from).unwrap_or_else(|_| roles[a].to_word()))
        .collect();
    let mut tx = Transaction::new(roles[&decl.from], roles[&decl.to], decl.function.as_str())
        .args(args)
        .value(word(decl.value));
    if let Some(g) = decl.gas_limit {
        tx = tx.gas_limit(g);
    }
    tx
}

/// Sum of ledger entries without wrapping; None if it exceeds a word.
fn exact_ledger_total(world: &WorldState, at: Address) -> Option<Word> {
    let ledger = Ledger::standard();
    let len = world.load(at, ledger.participants.len_slot()).low_u64();
    let mut sum = Word::zero();
    for i in 0..len {
        let holder = world.load(at, ledger.participants.element_slot(i));
        sum = sum.checked_add(world.load(at, ledger.balances.slot(holder)))?;
    }
    Some(sum)
}

fn ledger_broken(scenario: &Scenario, roles: &BTreeMap<String, Address>, world: &WorldState) -> bool {
    scenario.contracts.iter().any(|c| {
        let has_ledger = spec_for_template(&c.template).is_some_and(|s| s.ledger.is_some());
        if !has_ledger {
            return false;
        }
        let backing = roles[c.ledger_backing.as_deref().unwrap_or(&c.role)];
        match exact_ledger_total(world, roles[&c.role]) {
            Some(total) => total > world.balance(backing),
            None => true,
        }
    })
}

fn attacker_holdings(scenario: &Scenario, roles: &BTreeMap<String, Address>, world: &WorldState) -> i128 {
    scenario.attacker_roles.iter().map(|r| world.balance(roles[r]).low_u128() as i128).sum()
}

/// First guard rejection in the trace, else the transaction's own reason.
pub fn blocking_reason(trace: &ExecutionTrace, result: &ExecResult) -> Option<String> {
    let guard_revert = trace.events.iter().find_map(|r| match &r.event {
        crate::mcvm::TraceEvent::FrameExit { reason: Some(reason), .. } if GUARD_REASONS.contains(&reason.as_str()) => {
            Some(reason.clone())
        }
        _ => None,
    });
    guard_revert.or_else(|| result.revert_reason().map(str::to_string))
}

/// Builds the world, applies guards, runs setup, attack and settlement, and
/// judges the outcome.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioRun, HarnessError> {
    scenario.validate()?;
    let roles = role_addresses(scenario);
    let guards = effective_guards(scenario, opts);
    let Deployment { world, proxies, behaviors } = deploy(scenario, &roles, &guards)?;
    let deployed = world.clone();
    let mut vm = Vm::new(world);
    let mut transactions = Vec::new();

    for (index, decl) in scenario.setup.iter().enumerate() {
        let tx = build_tx(decl, &roles);
        let (trace, result) = vm.execute(&tx);
        if !result.success {
            return Err(HarnessError::SetupFailed {
                scenario: scenario.name.clone(),
                index,
                reason: result.revert_reason().unwrap_or_default().to_string(),
            });
        }
        transactions.push((tx, trace, result));
    }
    if opts.upgrade_before_attack {
        let admin = Address::from_low_u64(ADMIN_ADDRESS);
        for (i, (proxy, _)) in proxies.iter().enumerate() {
            let fresh = Address::from_low_u64(UPGRADE_BASE + i as u64);
            vm.world.insert(fresh, Account::with_behavior(behaviors[proxy].clone(), Word::zero()));
            let tx = sentinel::upgrade_to(admin, *proxy, fresh);
            let (trace, result) = vm.execute(&tx);
            if !result.success {
                return Err(HarnessError::SetupFailed {
                    scenario: scenario.name.clone(),
                    index: scenario.setup.len() + i,
                    reason: result.revert_reason().unwrap_or_default().to_string(),
                });
            }
            transactions.push((tx, trace, result));
        }
    }

    let pre_attack = vm.world.clone();
    let before = attacker_holdings(scenario, &roles, &vm.world);
    let attack_tx = build_tx(&scenario.attack, &roles);
    let (attack_trace, attack_result) = vm.execute(&attack_tx);
    transactions.push((attack_tx, attack_trace.clone(), attack_result.clone()));
    let post_attack = vm.world.clone();
    for decl in &scenario.settlement {
        let tx = build_tx(decl, &roles);
        let (trace, result) = vm.execute(&tx);
        transactions.push((tx, trace, result));
    }

    let net_gain = attacker_holdings(scenario, &roles, &vm.world) - before;
    let broken = ledger_broken(scenario, &roles, &vm.world);
    let exploited = net_gain > scenario.entitled_extra as i128 || broken;
    let verdict = Verdict {
        outcome: if exploited { Outcome::Exploited } else { Outcome::Protected },
        net_gain,
        ledger_broken: broken,
        revert_reason: blocking_reason(&attack_trace, &attack_result),
    };
    Ok(ScenarioRun {
        verdict,
        attack_trace,
        attack_result,
        deployed,
        pre_attack,
        post_attack,
        final_world: vm.world,
        roles,
        proxies,
        guards,
        transactions,
    })
}
