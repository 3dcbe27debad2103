use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{run_scenario, GuardKind, RunOptions, Verdict};
use super::scenario::Scenario;
use super::HarnessError;
use crate::oracle::VulnClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub protected: usize,
    pub total: usize,
}

impl Cell {
    fn add(&mut self, protected: bool) {
        self.total += 1;
        if protected {
            self.protected += 1;
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.protected, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub guard: GuardKind,
    pub cells: BTreeMap<VulnClass, Cell>,
    pub total: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    pub columns: Vec<VulnClass>,
    pub rows: Vec<MatrixRow>,
}

/// Verdict of one scenario under one guard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scenario: String,
    pub category: VulnClass,
    pub guard: GuardKind,
    pub verdict: Verdict,
}

/// Runs every (scenario, guard) pair, in parallel; results keep input order.
pub fn evaluate(corpus: &[Scenario], guards: &[GuardKind], opts: &RunOptions) -> Result<Vec<Evaluation>, HarnessError> {
    let pairs: Vec<(&Scenario, GuardKind)> =
        guards.iter().flat_map(|g| corpus.iter().map(move |s| (s, *g))).collect();
    pairs
        .par_iter()
        .map(|(s, g)| {
            let run = run_scenario(s, &RunOptions { guard: Some(*g), ..*opts })?;
            Ok(Evaluation { scenario: s.name.clone(), category: s.category, guard: *g, verdict: run.verdict })
        })
        .collect()
}

pub fn matrix_from(evaluations: &[Evaluation], guards: &[GuardKind]) -> CoverageMatrix {
    let mut columns: Vec<VulnClass> = evaluations.iter().map(|e| e.category).collect();
    columns.sort();
    columns.dedup();
    let rows = guards
        .iter()
        .map(|g| {
            let mut cells: BTreeMap<VulnClass, Cell> = columns.iter().map(|c| (*c, Cell::default())).collect();
            let mut total = Cell::default();
            for e in evaluations.iter().filter(|e| e.guard == *g) {
                cells.get_mut(&e.category).expect("column").add(e.verdict.is_protected());
                total.add(e.verdict.is_protected());
            }
            MatrixRow { guard: *g, cells, total }
        })
        .collect();
    CoverageMatrix { columns, rows }
}

pub fn build_matrix(corpus: &[Scenario], guards: &[GuardKind]) -> Result<CoverageMatrix, HarnessError> {
    Ok(matrix_from(&evaluate(corpus, guards, &RunOptions::default())?, guards))
}

impl CoverageMatrix {
    pub fn row(&self, guard: GuardKind) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.guard == guard)
    }

    pub fn cell(&self, guard: GuardKind, class: VulnClass) -> Option<Cell> {
        self.row(guard).and_then(|r| r.cells.get(&class).copied())
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<15}", "guard");
        for c in &self.columns {
            write!(out, "{:>9}", c.as_str()).unwrap();
        }
        writeln!(out, "{:>9}", "Total").unwrap();
        for row in &self.rows {
            write!(out, "{:<15}", row.guard.name()).unwrap();
            for c in &self.columns {
                write!(out, "{:>9}", row.cells[c].to_string()).unwrap();
            }
            writeln!(out, "{:>9}", row.total.to_string()).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}
