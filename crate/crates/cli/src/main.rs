//! Command-line front end for the reentrancy harness.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sentinel_core::harness::{
    evaluate, gas_report, generate_corpus, matrix_from, read_corpus, run_scenario, standard_workloads,
    validate_corpus, write_corpus, GuardKind, HarnessError, RunOptions, Scenario, DEFAULT_SEED,
};
use sentinel_core::mcvm::ExecutionTrace;
use sentinel_core::oracle::{detect_all, VulnClass};
use sentinel_core::sentinel::GuardMode;

/// Environment variable naming the default corpus directory.
const CORPUS_ENV: &str = "SENTINEL_CORPUS_DIR";

#[derive(Parser)]
#[command(name = "sentinel-harness", version, about = "Reentrancy guard harness: scenarios, coverage, gas, traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and print its verdict.
    Run {
        scenario: PathBuf,
        /// Guard applied to every protected contract; omitted means the file's own configuration.
        #[arg(long, value_parser = parse_guard)]
        guard: Option<GuardKind>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<GuardMode>,
        /// Write the attack transaction's trace here as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Coverage of each guard over the corpus.
    Matrix {
        /// Corpus directory; defaults to $SENTINEL_CORPUS_DIR, else a generated corpus.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long = "guard", value_parser = parse_guard, value_delimiter = ',',
              default_values = ["counter", "balance-delta", "sentinel"])]
        guards: Vec<GuardKind>,
        #[arg(long, value_parser = parse_category)]
        category: Option<VulnClass>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<GuardMode>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Proxy and baseline guard gas overheads.
    Gas {
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// List the reentrancy witnesses in an exported trace.
    CheckTrace { trace: PathBuf },
    /// Write the generated corpus, one JSON file per scenario.
    CorpusGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Check that every scenario is exploitable unguarded and detected.
    CorpusValidate {
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn parse_guard(s: &str) -> Result<GuardKind, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<GuardMode, String> {
    s.parse()
}

fn parse_category(s: &str) -> Result<VulnClass, String> {
    match s.parse()? {
        VulnClass::Ror => Err("ror is not a corpus category".into()),
        c => Ok(c),
    }
}

enum Failure {
    Input(String),
    Execution(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_input_error() { Failure::Input(e.to_string()) } else { Failure::Execution(e.to_string()) }
    }
}

fn corpus(dir: Option<PathBuf>, seed: u64) -> Result<Vec<Scenario>, Failure> {
    match dir.or_else(|| std::env::var_os(CORPUS_ENV).map(PathBuf::from)) {
        Some(d) => Ok(read_corpus(&d)?),
        None => Ok(generate_corpus(seed)),
    }
}

fn ensure_valid(corpus: &[Scenario]) -> Result<(), Failure> {
    let issues = validate_corpus(corpus);
    if issues.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = issues.iter().map(|i| format!("  {}: {}", i.scenario, i.problem)).collect();
    Err(Failure::Input(format!("invalid corpus:\n{}", list.join("\n"))))
}

fn run(path: &Path, guard: Option<GuardKind>, mode: Option<GuardMode>, trace_out: Option<PathBuf>, format: Format) -> Result<(), Failure> {
    let scenario = Scenario::load(path)?;
    let r = run_scenario(&scenario, &RunOptions { guard, mode, upgrade_before_attack: false })?;
    if let Some(out) = trace_out {
        std::fs::write(&out, r.attack_trace.to_ndjson())
            .map_err(|e| Failure::Execution(format!("{}: {e}", out.display())))?;
    }
    let v = &r.verdict;
    match format {
        Format::Structured => {
            let doc = json!({
                "scenario": scenario.name,
                "category": scenario.category,
                "guard": guard.map(|g| g.name()),
                "verdict": v,
                "attack_gas": r.attack_gas(),
                "static_probe_gas": r.max_static_probe_gas(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Table => {
            println!("scenario      {} ({})", scenario.name, scenario.category);
            println!("verdict       {}", if v.is_protected() { "PROTECTED" } else { "EXPLOITED" });
            println!("net gain      {} wei", v.net_gain);
            println!("ledger        {}", if v.ledger_broken { "broken" } else { "consistent" });
            println!("revert reason {}", v.revert_reason.as_deref().unwrap_or("-"));
            println!("attack gas    {}", r.attack_gas());
        }
    }
    Ok(())
}

fn check_trace(path: &Path) -> Result<(), Failure> {
    let file = std::fs::File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let trace = ExecutionTrace::read_ndjson(std::io::BufReader::new(file))
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let witnesses = detect_all(&trace).map_err(|e| Failure::Input(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    for w in witnesses {
        writeln!(out, "{w}").map_err(|e| Failure::Execution(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, guard, mode, trace_out, format } => run(&scenario, guard, mode, trace_out, format),
        Command::Matrix { corpus_dir, seed, guards, category, mode, format } => {
            let mut c = corpus(corpus_dir, seed)?;
            if let Some(cat) = category {
                c.retain(|s| s.category == cat);
            }
            ensure_valid(&c)?;
            let evals = evaluate(&c, &guards, &RunOptions { guard: None, mode, upgrade_before_attack: false })?;
            let m = matrix_from(&evals, &guards);
            match format {
                Format::Table => print!("{}", m.to_table()),
                Format::Structured => println!("{}", m.to_json()),
            }
            Ok(())
        }
        Command::Gas { format } => {
            let report = gas_report(&standard_workloads());
            match format {
                Format::Table => print!("{}", report.to_table()),
                Format::Structured => println!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::CheckTrace { trace } => check_trace(&trace),
        Command::CorpusGen { out, seed } => {
            let paths = write_corpus(&out, &generate_corpus(seed))?;
            println!("wrote {} scenarios to {}", paths.len(), out.display());
            Ok(())
        }
        Command::CorpusValidate { corpus_dir, seed } => {
            let c = corpus(corpus_dir, seed)?;
            ensure_valid(&c)?;
            println!("{} scenarios valid", c.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Execution(msg)) => {
            eprintln!("execution error: {msg}");
            ExitCode::from(3)
        }
    }
}
