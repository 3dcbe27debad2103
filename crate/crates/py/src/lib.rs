//! Python bindings. Structured results cross the boundary as JSON and are
//! decoded with the `json` module, so callers get plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

use sentinel_core::harness::{self, GuardKind, RunOptions, Scenario};
use sentinel_core::mcvm::ExecutionTrace;
use sentinel_core::oracle;
use sentinel_core::sentinel::{self, GuardMode};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn guard(name: Option<&str>) -> PyResult<Option<GuardKind>> {
    name.map(|g| g.parse::<GuardKind>().map_err(value_error)).transpose()
}

/// Storage slot for a label, as 0x-prefixed hex.
#[pyfunction]
fn derive_slot(label: &str) -> String {
    format!("{:#066x}", sentinel::derive_slot(label))
}

/// The seeded 70-scenario corpus, one dict per scenario.
#[pyfunction]
#[pyo3(signature = (seed = harness::DEFAULT_SEED))]
fn generate_corpus(py: Python<'_>, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let corpus = harness::generate_corpus(seed);
    loads(py, &serde_json::to_string(&corpus).map_err(value_error)?)
}

/// Runs a scenario given as a JSON string; returns the verdict plus gas data.
#[pyfunction]
#[pyo3(signature = (scenario_json, guard_kind = None, mode = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario_json: &str,
    guard_kind: Option<&str>,
    mode: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenario = Scenario::from_json(scenario_json).map_err(value_error)?;
    let mode = mode.map(|m| m.parse::<GuardMode>().map_err(value_error)).transpose()?;
    let opts = RunOptions { guard: guard(guard_kind)?, mode, upgrade_before_attack: false };
    let run = harness::run_scenario(&scenario, &opts).map_err(value_error)?;
    let doc = serde_json::json!({
        "verdict": run.verdict,
        "attack_gas": run.attack_gas(),
        "static_probe_gas": run.max_static_probe_gas(),
        "trace": run.attack_trace.to_ndjson(),
    });
    loads(py, &doc.to_string())
}

/// Coverage matrix over the seeded corpus.
#[pyfunction]
#[pyo3(signature = (seed = harness::DEFAULT_SEED, guards = None))]
fn coverage_matrix(py: Python<'_>, seed: u64, guards: Option<Vec<String>>) -> PyResult<Bound<'_, PyAny>> {
    let guards: Vec<GuardKind> = match guards {
        Some(list) => list.iter().map(|g| g.parse().map_err(value_error)).collect::<PyResult<_>>()?,
        None => vec![GuardKind::Counter, GuardKind::BalanceDelta, GuardKind::Sentinel],
    };
    let m = harness::build_matrix(&harness::generate_corpus(seed), &guards).map_err(value_error)?;
    loads(py, &m.to_json())
}

#[pyfunction]
fn gas_report(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    loads(py, &harness::gas_report(&harness::standard_workloads()).to_json())
}

/// Witnesses in an exported trace, one display line each.
#[pyfunction]
fn check_trace(ndjson: &str) -> PyResult<Vec<String>> {
    let trace = ExecutionTrace::from_ndjson(ndjson).map_err(value_error)?;
    Ok(oracle::detect_all(&trace).map_err(value_error)?.iter().map(|w| w.to_string()).collect())
}

#[pymodule]
fn sentinel_guard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(derive_slot, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(gas_report, m)?)?;
    m.add_function(wrap_pyfunction!(check_trace, m)?)?;
    Ok(())
}
