use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::behaviors::{spec_for_template, TemplateParams};
use crate::oracle::VulnClass;
use crate::sentinel::GuardMode;

/// Guard deployed in front of one contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GuardConfig {
    #[default]
    None,
    Counter,
    BalanceDelta,
    Sentinel { mode: GuardMode, domain: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDecl {
    pub role: String,
    pub template: String,
    #[serde(default)]
    pub params: TemplateParams,
    /// Wei credited to the account at deployment.
    #[serde(default)]
    pub funding: u128,
    /// Part of the protected system; guard sweeps apply only to these.
    #[serde(default)]
    pub protect: bool,
    #[serde(default)]
    pub guard: GuardConfig,
    /// Functions a baseline guard wraps. Absent means every non-view function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guarded_functions: Option<Vec<String>>,
    /// Role whose ETH backs this contract's ledger; absent means itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_backing: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EoaDecl {
    pub role: String,
    pub balance: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxDecl {
    pub from: String,
    pub to: String,
    pub function: String,
    /// Each argument is a role name or a decimal number.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default)]
    pub value: u128,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_limit: Option<u64>,
}

impl TxDecl {
    pub fn new(from: &str, to: &str, function: &str) -> Self {
        TxDecl {
            from: from.into(),
            to: to.into(),
            function: function.into(),
            args: Vec::new(),
            value: 0,
            gas_limit: None,
        }
    }

    pub fn value(mut self, value: u128) -> Self {
        self.value = value;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub category: VulnClass,
    /// The exploit harvests a stale view rather than re-entering a mutator.
    #[serde(default)]
    pub read_only: bool,
    pub contracts: Vec<ContractDecl>,
    pub eoas: Vec<EoaDecl>,
    #[serde(default)]
    pub setup: Vec<TxDecl>,
    pub attack: TxDecl,
    #[serde(default)]
    pub settlement: Vec<TxDecl>,
    /// Roles whose combined balance change is the attacker's gain.
    pub attacker_roles: Vec<String>,
    /// Gain the attacker is entitled to (e.g. an honestly earned reward).
    #[serde(default)]
    pub entitled_extra: u128,
}

impl Scenario {
    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.contracts.iter().map(|c| c.role.as_str()).chain(self.eoas.iter().map(|e| e.role.as_str()))
    }

    /// Structural checks that do not need execution.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |msg: String| Err(HarnessError::Invalid { scenario: self.name.clone(), message: msg });
        if self.category == VulnClass::Ror {
            return invalid("category must be SFR, CFR or CCR; read-only cases set read_only".into());
        }
        let mut roles = BTreeSet::new();
        for role in self.roles() {
            if !roles.insert(role) {
                return invalid(format!("duplicate role {role}"));
            }
        }
        for c in &self.contracts {
            let Some(spec) = spec_for_template(&c.template) else {
                return invalid(format!("unknown template {}", c.template));
            };
            for f in c.guarded_functions.iter().flatten() {
                if !spec.functions.contains_key(&f.as_str().into()) {
                    return invalid(format!("{} has no function {f}", c.template));
                }
            }
            if let Some(b) = &c.ledger_backing {
                if !roles.contains(b.as_str()) {
                    return invalid(format!("unknown ledger backing role {b}"));
                }
            }
        }
        for tx in self.setup.iter().chain([&self.attack]).chain(&self.settlement) {
            for r in [&tx.from, &tx.to] {
                if !roles.contains(r.as_str()) {
                    return invalid(format!("transaction references unknown role {r}"));
                }
            }
            for a in &tx.args {
                if a.parse::<u128>().is_err() && !roles.contains(a.as_str()) {
                    return invalid(format!("argument {a} is neither a number nor a role"));
                }
            }
        }
        for r in &self.attacker_roles {
            if !roles.contains(r.as_str()) {
                return invalid(format!("unknown attacker role {r}"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        let scenario = Self::from_json(&text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Writes one `<name>.json` per scenario; returns the paths in corpus order.
pub fn write_corpus(dir: &Path, corpus: &[Scenario]) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io { path: dir.to_path_buf(), message: e.to_string() };
    fs::create_dir_all(dir).map_err(io)?;
    let mut paths = Vec::with_capacity(corpus.len());
    for s in corpus {
        let path = dir.join(format!("{}.json", s.name));
        fs::write(&path, s.to_json() + "\n").map_err(io)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads every `*.json` in `dir`, ordered by category then name.
pub fn read_corpus(dir: &Path) -> Result<Vec<Scenario>, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io { path: dir.to_path_buf(), message: e.to_string() };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut corpus = paths.iter().map(|p| Scenario::load(p)).collect::<Result<Vec<_>, _>>()?;
    corpus.sort_by(|a, b| (a.category, &a.name).cmp(&(b.category, &b.name)));
    Ok(corpus)
}
