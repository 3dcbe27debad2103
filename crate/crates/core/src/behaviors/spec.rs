use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::mcvm::FunctionId;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FunctionSpec {
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub view: bool,
}

/// Ledger declaration: which mapping holds per-holder balances that are
/// backed by ETH held somewhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerDecl {
    pub balances: String,
    pub participants: String,
}

/// Static description of a template: its functions and the storage variables
/// each may read or write.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct BehaviorSpec {
    pub template: String,
    pub functions: BTreeMap<FunctionId, FunctionSpec>,
    pub ledger: Option<LedgerDecl>,
}

impl BehaviorSpec {
    pub fn new(template: &str) -> Self {
        BehaviorSpec { template: template.to_string(), ..Default::default() }
    }

    pub fn function(mut self, name: &str, reads: &[&str], writes: &[&str]) -> Self {
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        self.functions.insert(
            FunctionId::new(name),
            FunctionSpec { reads: set(reads), writes: set(writes), view: false },
        );
        self
    }

    pub fn view(mut self, name: &str, reads: &[&str]) -> Self {
        self = self.function(name, reads, &[]);
        self.functions.get_mut(&FunctionId::new(name)).expect("just inserted").view = true;
        self
    }

    pub fn with_ledger(mut self, balances: &str, participants: &str) -> Self {
        self.ledger = Some(LedgerDecl { balances: balances.into(), participants: participants.into() });
        self
    }

    pub fn reads(&self, f: &FunctionId) -> BTreeSet<String> {
        self.functions.get(f).map(|s| s.reads.clone()).unwrap_or_default()
    }

    pub fn writes(&self, f: &FunctionId) -> BTreeSet<String> {
        self.functions.get(f).map(|s| s.writes.clone()).unwrap_or_default()
    }

    pub fn touches(&self, f: &FunctionId) -> BTreeSet<String> {
        let mut all = self.reads(f);
        all.extend(self.writes(f));
        all
    }

    /// Variables both functions read or modify.
    pub fn shared_state(&self, f1: &FunctionId, f2: &FunctionId) -> BTreeSet<String> {
        self.touches(f1).intersection(&self.touches(f2)).cloned().collect()
    }

    /// Non-view functions, the set a guard may wrap.
    pub fn mutating_functions(&self) -> Vec<FunctionId> {
        self.functions.iter().filter(|(_, s)| !s.view).map(|(f, _)| f.clone()).collect()
    }
}
