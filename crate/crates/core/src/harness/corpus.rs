//! Seeded scenario corpus: 38 same-function, 20 cross-function and 12
//! cross-contract cases, some of the latter two harvesting stale views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{ContractDecl, EoaDecl, GuardConfig, Scenario, TxDecl};
use crate::behaviors::{LedgerUpdate, RedeemMode, RewardPool, TemplateParams};
use crate::mcvm::{word_to_u128, WEI_PER_ETHER};
use crate::oracle::VulnClass;

pub const SFR_COUNT: usize = 38;
pub const CFR_COUNT: usize = 20;
pub const CCR_COUNT: usize = 12;
pub const DEFAULT_SEED: u64 = 2024;

const HONEST: [&str; 3] = ["alice", "bob", "carol"];
const POOL_FUNDING: u128 = 50 * WEI_PER_ETHER;

/// Cross-function family: (stale-view, guarded subset, ledger update, count).
const CFR_PLAN: [(bool, &[&str], LedgerUpdate, usize); 6] = [
    (true, &[], LedgerUpdate::ZeroAfterSend, 4),
    (false, &[], LedgerUpdate::ZeroAfterSend, 5),
    (false, &[], LedgerUpdate::WrappingSubAfterSend, 5),
    (false, &["deposit", "withdraw"], LedgerUpdate::ZeroAfterSend, 3),
    (false, &["deposit", "withdraw"], LedgerUpdate::WrappingSubAfterSend, 2),
    (false, &["transfer"], LedgerUpdate::ZeroAfterSend, 1),
];
const CCR_READ_ONLY: usize = 3;

fn contract(role: &str, template: &str, params: TemplateParams) -> ContractDecl {
    ContractDecl {
        role: role.into(),
        template: template.into(),
        params,
        funding: 0,
        protect: false,
        guard: GuardConfig::None,
        guarded_functions: None,
        ledger_backing: None,
    }
}

fn protected(mut c: ContractDecl, guarded: &[&str]) -> ContractDecl {
    c.protect = true;
    if !guarded.is_empty() {
        c.guarded_functions = Some(guarded.iter().map(|s| s.to_string()).collect());
    }
    c
}

fn some(s: &str) -> Option<String> {
    Some(s.to_string())
}

/// Honest deposits: `units` stakes split over one to three depositors.
struct Funding {
    eoas: Vec<EoaDecl>,
    setup: Vec<TxDecl>,
    total: u128,
}

fn honest_funding(rng: &mut ChaCha8Rng, stake: u128, units: u64, target: &str) -> Funding {
    let depositors = rng.random_range(1..=units.min(HONEST.len() as u64)) as usize;
    let mut shares = vec![1u64; depositors];
    for _ in depositors as u64..units {
        shares[rng.random_range(0..depositors)] += 1;
    }
    let mut eoas = Vec::new();
    let mut setup = Vec::new();
    for (name, n) in HONEST.iter().zip(&shares) {
        let amount = stake * u128::from(*n);
        eoas.push(EoaDecl { role: name.to_string(), balance: amount + WEI_PER_ETHER });
        setup.push(TxDecl::new(name, target, "deposit").value(amount));
    }
    Funding { eoas, setup, total: stake * u128::from(units) }
}

fn stake(rng: &mut ChaCha8Rng) -> u128 {
    rng.random_range(1..=5u128) * WEI_PER_ETHER
}

fn attacker_eoas(stake: u128, accomplice: bool) -> Vec<EoaDecl> {
    let mut v = vec![EoaDecl { role: "mallory".into(), balance: stake + WEI_PER_ETHER }];
    if accomplice {
        v.push(EoaDecl { role: "accomplice".into(), balance: 0 });
    }
    v
}

fn bank(update: LedgerUpdate, guarded: &[&str]) -> ContractDecl {
    protected(contract("bank", "bank", TemplateParams { update: Some(update), ..Default::default() }), guarded)
}

fn pool(vault: &str, view_fn: &str, rate_bps: u64) -> ContractDecl {
    let mut c = contract(
        "pool",
        "reward_pool",
        TemplateParams { vault: some(vault), view_fn: some(view_fn), rate_bps: Some(rate_bps), ..Default::default() },
    );
    c.funding = POOL_FUNDING;
    c
}

fn reward(total: u128, rate_bps: u64) -> u128 {
    word_to_u128(RewardPool::reward_for(total.into(), rate_bps))
}

fn sfr(rng: &mut ChaCha8Rng, index: usize) -> Scenario {
    let s = stake(rng);
    let units = rng.random_range(1..=7u64);
    let funding = honest_funding(rng, s, units, "bank");
    let mut params = TemplateParams { victim: some("bank"), ..Default::default() };
    if rng.random_bool(0.5) {
        params.threshold = Some(rng.random_range(0..s));
    } else {
        params.reentries = Some(rng.random_range(1..=units as u32));
    }
    let guarded: &[&str] = if rng.random_bool(0.5) { &["withdraw"] } else { &["deposit", "withdraw"] };
    let mut eoas = funding.eoas;
    eoas.extend(attacker_eoas(s, false));
    Scenario {
        name: format!("sfr-{index:02}"),
        category: VulnClass::Sfr,
        read_only: false,
        contracts: vec![bank(LedgerUpdate::ZeroAfterSend, guarded), contract("attacker", "sfr_attacker", params)],
        eoas,
        setup: funding.setup,
        attack: TxDecl::new("mallory", "attacker", "attack").value(s),
        settlement: vec![],
        attacker_roles: vec!["mallory".into(), "attacker".into()],
        entitled_extra: 0,
    }
}

fn cfr(rng: &mut ChaCha8Rng, index: usize, read_only: bool, guarded: &[&str], update: LedgerUpdate) -> Scenario {
    let s = stake(rng);
    let units = rng.random_range(1..=7u64);
    let funding = honest_funding(rng, s, units, "bank");
    let mut eoas = funding.eoas;
    let all = ["deposit", "withdraw", "transfer"];
    let guarded = if guarded.is_empty() { &all[..] } else { guarded };
    let (contracts, settlement, attacker_roles, entitled_extra) = if read_only {
        let rate = rng.random_range(1..=20u64) * 100;
        eoas.extend(attacker_eoas(s, false));
        let attacker = TemplateParams { vault: some("bank"), pool: some("pool"), trigger: some("bank"), ..Default::default() };
        (
            vec![bank(update, guarded), pool("bank", "totalAssets", rate), contract("attacker", "ror_attacker", attacker)],
            vec![],
            vec!["mallory".into(), "attacker".into()],
            reward(funding.total, rate),
        )
    } else {
        eoas.extend(attacker_eoas(s, true));
        let attacker = TemplateParams { victim: some("bank"), accomplice: some("accomplice"), ..Default::default() };
        (
            vec![bank(update, guarded), contract("attacker", "cfr_attacker", attacker)],
            vec![TxDecl::new("accomplice", "bank", "withdraw")],
            vec!["mallory".into(), "attacker".into(), "accomplice".into()],
            0,
        )
    };
    Scenario {
        name: format!("cfr-{index:02}"),
        category: VulnClass::Cfr,
        read_only,
        contracts,
        eoas,
        setup: funding.setup,
        attack: TxDecl::new("mallory", "attacker", "attack").value(s),
        settlement,
        attacker_roles,
        entitled_extra,
    }
}

fn ccr(rng: &mut ChaCha8Rng, index: usize, read_only: bool) -> Scenario {
    let s = stake(rng);
    let units = rng.random_range(1..=7u64);
    let funding = honest_funding(rng, s, units, "vault");
    let redeem = if rng.random_bool(0.5) { RedeemMode::ForwardEth } else { RedeemMode::Hook };
    let write_before_call = rng.random_bool(0.5);
    let vault = protected(
        contract(
            "vault",
            "ccr_vault",
            TemplateParams {
                token: some("token"),
                write_before_call: Some(write_before_call),
                redeem: Some(redeem),
                ..Default::default()
            },
        ),
        &["deposit", "withdraw"],
    );
    let mut token = protected(
        contract("token", "ccr_token", TemplateParams { vault: some("vault"), redeem: Some(redeem), ..Default::default() }),
        &["transfer"],
    );
    token.ledger_backing = some("vault");
    let mut eoas = funding.eoas;
    let mut contracts = vec![vault, token];
    let (settlement, attacker_roles, entitled_extra) = if read_only {
        let rate = rng.random_range(1..=20u64) * 100;
        eoas.extend(attacker_eoas(s, false));
        contracts.push(pool("token", "totalSupply", rate));
        contracts.push(contract(
            "attacker",
            "ror_attacker",
            TemplateParams { vault: some("vault"), pool: some("pool"), trigger: some("token"), ..Default::default() },
        ));
        (vec![], vec!["mallory".into(), "attacker".into()], reward(funding.total, rate))
    } else {
        eoas.extend(attacker_eoas(s, true));
        contracts.push(contract(
            "attacker",
            "ccr_attacker",
            TemplateParams { vault: some("vault"), token: some("token"), accomplice: some("accomplice"), ..Default::default() },
        ));
        (
            vec![TxDecl::new("accomplice", "vault", "withdraw")],
            vec!["mallory".into(), "attacker".into(), "accomplice".into()],
            0,
        )
    };
    Scenario {
        name: format!("ccr-{index:02}"),
        category: VulnClass::Ccr,
        read_only,
        contracts,
        eoas,
        setup: funding.setup,
        attack: TxDecl::new("mallory", "attacker", "attack").value(s),
        settlement,
        attacker_roles,
        entitled_extra,
    }
}

/// Deterministic corpus for `seed`, ordered SFR, CFR, CCR.
pub fn generate_corpus(seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(SFR_COUNT + CFR_COUNT + CCR_COUNT);
    for i in 1..=SFR_COUNT {
        corpus.push(sfr(&mut rng, i));
    }
    let mut index = 1;
    for (read_only, guarded, update, count) in CFR_PLAN {
        for _ in 0..count {
            corpus.push(cfr(&mut rng, index, read_only, guarded, update));
            index += 1;
        }
    }
    for i in 1..=CCR_COUNT {
        corpus.push(ccr(&mut rng, i, i <= CCR_READ_ONLY));
    }
    corpus
}

/// The scenario's deployment driven only by honest users: the first honest
/// depositor withdraws, the rest move ledger balance between themselves,
/// and any reward pool is claimed in its own transaction.
pub fn honest_flow(scenario: &Scenario) -> Scenario {
    let mut s = scenario.clone();
    s.name = format!("{}-honest", scenario.name);
    let depositors: Vec<String> = scenario.setup.iter().map(|t| t.from.clone()).collect();
    let entry = scenario.setup.first().map(|t| t.to.clone()).unwrap_or_default();
    let first = depositors.first().cloned().unwrap_or_default();
    s.attack = TxDecl::new(&first, &entry, "withdraw");
    s.settlement.clear();
    if let Some(second) = depositors.get(1) {
        let holder_contract = if entry == "vault" { "token" } else { entry.as_str() };
        let mut tx = TxDecl::new(second, holder_contract, "transfer");
        tx.args = vec![first.clone(), "1".into()];
        s.settlement.push(tx);
    }
    if scenario.contracts.iter().any(|c| c.role == "pool") {
        s.settlement.push(TxDecl::new(&first, "pool", "getReward"));
    }
    s.settlement.push(TxDecl::new(&first, &entry, "totalAssets"));
    s.attacker_roles = vec![first];
    s.entitled_extra = u128::MAX / 2;
    s
}

/// Same scenario with the bank settling its ledger before sending.
pub fn cei_safe_variant(scenario: &Scenario) -> Scenario {
    let mut s = scenario.clone();
    s.name = format!("{}-cei", scenario.name);
    for c in &mut s.contracts {
        if c.template == "bank" {
            c.params.update = Some(LedgerUpdate::ZeroBeforeSend);
        }
    }
    s
}
