//! Scenario corpus, execution under guard configurations, verdicts, the
//! coverage matrix and gas-overhead measurement.

mod corpus;
mod gas;
mod matrix;
mod run;
mod scenario;

use std::path::PathBuf;

use thiserror::Error;

use crate::baselines::AttachError;
use crate::behaviors::TemplateError;
use crate::oracle::{self, VulnClass};

pub use corpus::{cei_safe_variant, generate_corpus, honest_flow, CCR_COUNT, CFR_COUNT, DEFAULT_SEED, SFR_COUNT};
pub use gas::{gas_report, measure_gas_overhead, standard_workloads, GasReport, GasRow, Overhead, Workload};
pub use matrix::{build_matrix, evaluate, matrix_from, Cell, CoverageMatrix, Evaluation, MatrixRow};
pub use run::{
    blocking_reason, default_mode, effective_guards, run_scenario, GuardKind, Outcome, RunOptions, ScenarioRun,
    Verdict, ADMIN_ADDRESS, GUARD_REASONS, REGISTRY_ADDRESS, SHARED_DOMAIN,
};
pub use scenario::{read_corpus, write_corpus, ContractDecl, EoaDecl, GuardConfig, Scenario, TxDecl};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("scenario {scenario}: {message}")]
    Invalid { scenario: String, message: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Attach(#[from] AttachError),
    #[error("scenario {scenario}: setup transaction {index} failed: {reason}")]
    SetupFailed { scenario: String, index: usize, reason: String },
}

impl HarnessError {
    /// Problems with the input files rather than with running them.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, HarnessError::SetupFailed { .. })
    }
}

/// Why a scenario is not a valid corpus member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIssue {
    pub scenario: String,
    pub problem: String,
}

/// Every scenario must be exploitable unguarded and detected as its
/// category (and as read-only reentrancy when flagged so).
pub fn validate_corpus(corpus: &[Scenario]) -> Vec<CorpusIssue> {
    use rayon::prelude::*;
    corpus
        .par_iter()
        .filter_map(|s| {
            let problem = match run_scenario(s, &RunOptions { guard: Some(GuardKind::None), ..Default::default() }) {
                Err(e) => Some(e.to_string()),
                Ok(run) if run.verdict.is_protected() => Some("not exploitable without a guard".into()),
                Ok(run) => {
                    let mut classes = vec![s.category];
                    if s.read_only {
                        classes.push(VulnClass::Ror);
                    }
                    classes.into_iter().find_map(|c| match oracle::detect(&run.attack_trace, c) {
                        Err(e) => Some(e.to_string()),
                        Ok(w) if w.is_empty() => Some(format!("no {c} witness in the attack trace")),
                        Ok(_) => None,
                    })
                }
            };
            problem.map(|problem| CorpusIssue { scenario: s.name.clone(), problem })
        })
        .collect()
}
