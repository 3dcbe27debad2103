use std::path::PathBuf;

use sentinel_core::harness::{
    build_matrix, evaluate, gas_report, generate_corpus, matrix_from, read_corpus, run_scenario, standard_workloads,
    write_corpus, CoverageMatrix, GuardKind, HarnessError, Outcome, RunOptions, Scenario, CCR_COUNT, CFR_COUNT,
    DEFAULT_SEED, SFR_COUNT,
};
use sentinel_core::oracle::VulnClass;
use sentinel_core::sentinel::{REASON_HIGH_SECURITY, REASON_OPTIMIZED};

fn corpus() -> Vec<Scenario> {
    generate_corpus(DEFAULT_SEED)
}

fn opts(guard: GuardKind) -> RunOptions {
    RunOptions { guard: Some(guard), ..Default::default() }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sentinel-harness-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn corpus_counts_and_read_only_share() {
    let c = corpus();
    let count = |cat, ro: Option<bool>| c.iter().filter(|s| s.category == cat && ro.is_none_or(|r| s.read_only == r)).count();
    assert_eq!(count(VulnClass::Sfr, None), SFR_COUNT);
    assert_eq!(count(VulnClass::Cfr, None), CFR_COUNT);
    assert_eq!(count(VulnClass::Ccr, None), CCR_COUNT);
    assert_eq!(c.len(), 70);
    assert!(count(VulnClass::Cfr, Some(true)) >= 4);
    assert!(count(VulnClass::Ccr, Some(true)) >= 2);
    assert_eq!(count(VulnClass::Sfr, Some(true)), 0);
    let names: std::collections::BTreeSet<_> = c.iter().map(|s| &s.name).collect();
    assert_eq!(names.len(), 70);
}

#[test]
fn corpus_is_a_function_of_the_seed() {
    assert_eq!(generate_corpus(7), generate_corpus(7));
    assert_ne!(generate_corpus(7), generate_corpus(8));
}

#[test]
fn sfr_under_sentinel_is_blocked_by_the_lock() {
    let s = corpus().into_iter().find(|s| s.category == VulnClass::Sfr).unwrap();
    let r = run_scenario(&s, &opts(GuardKind::Sentinel)).unwrap();
    assert_eq!(r.verdict.outcome, Outcome::Protected);
    assert_eq!(r.verdict.revert_reason.as_deref(), Some(REASON_OPTIMIZED));
    let open = run_scenario(&s, &opts(GuardKind::None)).unwrap();
    assert_eq!(open.verdict.outcome, Outcome::Exploited);
    assert!(open.verdict.net_gain > 0);
}

#[test]
fn ccr_passes_per_contract_guards_but_not_the_shared_domain() {
    for s in corpus().iter().filter(|s| s.category == VulnClass::Ccr && !s.read_only) {
        for g in [GuardKind::Counter, GuardKind::BalanceDelta] {
            assert_eq!(run_scenario(s, &opts(g)).unwrap().verdict.outcome, Outcome::Exploited, "{}", s.name);
        }
        let r = run_scenario(s, &opts(GuardKind::Sentinel)).unwrap();
        assert_eq!(r.verdict.revert_reason.as_deref(), Some(REASON_HIGH_SECURITY), "{}", s.name);
    }
}

#[test]
fn scenario_files_round_trip() {
    let dir = scratch("roundtrip");
    let c = corpus();
    let paths = write_corpus(&dir, &c).unwrap();
    assert_eq!(paths.len(), 70);
    let mut back = read_corpus(&dir).unwrap();
    let mut orig = c.clone();
    back.sort_by(|a, b| a.name.cmp(&b.name));
    orig.sort_by(|a, b| a.name.cmp(&b.name));
    assert_eq!(back, orig);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn malformed_scenarios_are_input_errors() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"category\": 12\n}\n").unwrap();
    let err = Scenario::load(&path).unwrap_err();
    assert!(matches!(err, HarnessError::Parse { line: 3, .. }), "{err}");
    assert!(err.is_input_error());

    let mut s = corpus().remove(0);
    s.contracts[0].template = "mystery".into();
    assert!(matches!(run_scenario(&s, &RunOptions::default()), Err(HarnessError::Invalid { .. })));
    let mut s = corpus().remove(0);
    s.attack.to = "nobody".into();
    assert!(s.validate().is_err());
    let missing = Scenario::load(&dir.join("absent.json")).unwrap_err();
    assert!(matches!(missing, HarnessError::Io { .. }));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn failing_setup_is_an_execution_error() {
    let mut s = corpus().remove(0);
    s.setup[0].value = u128::MAX / 4;
    let err = run_scenario(&s, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::SetupFailed { index: 0, .. }));
    assert!(!err.is_input_error());
}

#[test]
fn matrix_rows_add_up_and_sentinel_dominates() {
    let m = build_matrix(&corpus(), &GuardKind::ALL).unwrap();
    for row in &m.rows {
        let sum: usize = row.cells.values().map(|c| c.protected).sum();
        let total: usize = row.cells.values().map(|c| c.total).sum();
        assert_eq!((row.total.protected, row.total.total), (sum, total));
        assert_eq!(row.total.total, 70);
    }
    let sentinel = m.row(GuardKind::Sentinel).unwrap();
    for g in [GuardKind::Counter, GuardKind::BalanceDelta] {
        for c in &m.columns {
            assert!(sentinel.cells[c].protected >= m.cell(g, *c).unwrap().protected);
        }
    }
    let parsed: CoverageMatrix = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(parsed, m);
    assert!(m.to_table().lines().nth(4).unwrap().contains("70/70"));
}

#[test]
fn category_subset_gives_one_column() {
    let ccr: Vec<Scenario> = corpus().into_iter().filter(|s| s.category == VulnClass::Ccr).collect();
    let guards = [GuardKind::Sentinel];
    let m = matrix_from(&evaluate(&ccr, &guards, &RunOptions::default()).unwrap(), &guards);
    assert_eq!(m.columns, vec![VulnClass::Ccr]);
    assert_eq!(m.cell(GuardKind::Sentinel, VulnClass::Ccr).unwrap().protected, 12);
}

#[test]
fn parallel_evaluation_matches_sequential_runs() {
    let c: Vec<Scenario> = corpus().into_iter().step_by(5).collect();
    let evals = evaluate(&c, &GuardKind::ALL, &RunOptions::default()).unwrap();
    let mut i = 0;
    for g in GuardKind::ALL {
        for s in &c {
            assert_eq!(evals[i].scenario, s.name);
            assert_eq!(evals[i].verdict, run_scenario(s, &opts(g)).unwrap().verdict);
            i += 1;
        }
    }
}

#[test]
fn gas_report_is_stable_and_non_negative() {
    let a = gas_report(&standard_workloads());
    let b = gas_report(&standard_workloads());
    assert_eq!(a, b);
    for r in &a.rows {
        assert!(r.optimized.proxied >= r.optimized.direct);
        assert!(r.high_security.overhead > r.optimized.overhead);
        assert_eq!(r.optimized.static_overhead, r.high_security.static_overhead);
    }
    assert!(a.counter_range.0 > 0 && a.counter_range.0 <= a.counter_range.1);
}
