//! The `branchlab` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cosmo::{branch_measure, normalize_families, write_samples_csv, CosmoError, CosmoSpec, MeasureResult, MeasureValue};
use crate::credence::CredenceTable;
use crate::epistemics::{dutch_book_check, Bet, BookReport, EpistemicError};
use crate::report::{run_report, tool_version, RunReport, SCHEMA_VERSION};
use crate::scenario::{builtin, parse_scenario, Rule, Scenario, ScenarioError};
use crate::verify::{run_suite, Suite, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "branchlab", version, about = "Branching worlds and self-locating credences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario's queries and summarize its branches.
    Run {
        /// Scenario file, or `builtin:<name>`.
        scenario: String,
        /// Rule forced onto every query.
        #[arg(long)]
        rule: Option<Rule>,
        /// Tick forced onto every query.
        #[arg(long)]
        at: Option<u32>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded invariant suite.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Offer a book of bets and settle it on every branch.
    Dutchbook {
        scenario: String,
        /// JSON list of bets, or an object with a `bets` list. Defaults to the
        /// scenario's own bets.
        book: Option<PathBuf>,
        #[arg(long)]
        rule: Rule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Observer measures of cosmological branch families.
    Measure {
        /// Scenario with a `cosmo` section, a bare `{"families": [...]}`
        /// document, or `builtin:<name>`.
        config: String,
        /// Write integrand samples here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse { .. }
            | ScenarioError::Link { .. }
            | ScenarioError::Event { .. }
            | ScenarioError::UnknownScenario(_)
            | ScenarioError::Unreachable { .. } => CliError::Input(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<EpistemicError> for CliError {
    fn from(e: EpistemicError) -> Self {
        match e {
            EpistemicError::Scenario(s) => s.into(),
            EpistemicError::ZeroEvidence(_) => CliError::Failure(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CosmoError> for CliError {
    fn from(e: CosmoError) -> Self {
        match e {
            CosmoError::NoSupport => CliError::Failure(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> CliResult {
    out.write_fmt(text).map_err(|e| CliError::Failure(format!("cannot write output: {e}")))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { emit($out, format_args!("{}\n", format_args!($($arg)*)))? };
}

/// `builtin:<name>` or a path to a scenario file.
pub fn load_scenario(spec: &str) -> Result<Scenario, String> {
    let text = match spec.strip_prefix("builtin:") {
        Some(name) => return builtin(name).map_err(|e| e.to_string()),
        None => fs::read_to_string(spec).map_err(|e| format!("cannot read {spec}: {e}"))?,
    };
    parse_scenario(&text).map_err(|e| e.to_string())
}

fn scenario_arg(spec: &str) -> Result<Scenario, CliError> {
    load_scenario(spec).map_err(CliError::Input)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn print_table(out: &mut dyn Write, indent: &str, t: &CredenceTable) -> CliResult {
    let width = t.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0).max(4);
    for (k, p) in t.iter() {
        say!(out, "{indent}{k:<width$}  {p:.12}");
    }
    Ok(())
}

fn cmd_run(out: &mut dyn Write, scenario: &str, rule: Option<Rule>, at: Option<u32>, path: Option<&Path>) -> CliResult {
    let sc = scenario_arg(scenario)?;
    let report: RunReport = run_report(&sc, rule, at)?;
    say!(out, "scenario {}  tick {}", report.scenario, report.tick);
    say!(out, "branches:");
    let width = report.branches.iter().map(|b| b.label.chars().count()).max().unwrap_or(0).max(6);
    for b in &report.branches {
        say!(out, "  {:<width$}  {:.12}", b.label, b.weight);
    }
    for q in &report.queries {
        let label = q.query.label.as_deref().unwrap_or("query");
        say!(out, "{label}: observer {} at t{} under {}", q.query.observer, q.query.time, q.query.rule);
        print_table(out, "  ", &q.table)?;
        say!(out, "  P = {:.12}", q.probability);
    }
    if let Some(p) = path {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}

fn cmd_verify(out: &mut dyn Write, suite: Suite, trials: u64, seed: u64, path: Option<&Path>) -> CliResult {
    if trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let report: SuiteReport = run_suite(suite, trials, seed);
    for t in &report.trials {
        let verdict = if t.pass() { "ok" } else { "FAIL" };
        say!(out, "trial {:>4}  seed {:>6}  max deviation {:.3e}  {verdict}", t.index, t.seed, t.max_deviation());
        if let Some(e) = &t.error {
            say!(out, "  error: {e}");
        }
        for c in t.checks.iter().filter(|c| !c.pass()) {
            say!(out, "  {}: {:.3e} > {:.0e}", c.name, c.deviation, c.tolerance);
        }
    }
    for (name, worst) in report.worst_by_check() {
        say!(out, "worst {name}: {worst:.3e}");
    }
    let passed = report.trials.iter().filter(|t| t.pass()).count();
    say!(out, "{suite}: {passed}/{trials} trials passed");
    if let Some(p) = path {
        write_file(p, &to_json(&report))?;
    }
    match report.reproduce() {
        Some(cmd) => Err(CliError::Failure(format!("reproduce with: {cmd}"))),
        None => Ok(()),
    }
}

fn parse_book(text: &str) -> Result<Vec<Bet>, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("book is not JSON: {e}"))?;
    // Parse the inner list directly so errors carry a path.
    let list = match value {
        serde_json::Value::Object(mut m) if m.contains_key("bets") => m.remove("bets").expect("bets"),
        v @ serde_json::Value::Array(_) => v,
        _ => return Err("book must be a list of bets or an object with a `bets` list".into()),
    };
    serde_path_to_error::deserialize::<_, Vec<Bet>>(list).map_err(|e| format!("invalid book at `{}`: {}", e.path(), e.inner()))
}

fn cmd_dutchbook(out: &mut dyn Write, scenario: &str, book: Option<&Path>, rule: Rule, path: Option<&Path>) -> CliResult {
    let sc = scenario_arg(scenario)?;
    let bets = match book {
        Some(p) => parse_book(&read(p)?).map_err(CliError::Input)?,
        None => sc.bets.clone(),
    };
    let report: BookReport = dutch_book_check(&sc, rule, &bets)?;
    say!(out, "scenario {}  rule {}", report.scenario, report.rule);
    for d in &report.decisions {
        let verdict = if d.accepted { "accept" } else { "decline" };
        match d.expected_value {
            Some(ev) => say!(out, "bet {} at t{} ({}): EV {ev:+.6}  {verdict}", d.id, d.offered_at, d.observer),
            None => say!(out, "bet {} at t{} ({}): {verdict}", d.id, d.offered_at, d.observer),
        }
        if let Some(c) = &d.credences {
            print_table(out, "  ", c)?;
        }
        if let Some(n) = &d.note {
            say!(out, "  {n}");
        }
    }
    say!(out, "nets:");
    for (who, net) in &report.nets {
        say!(out, "  {who}  {net:+.6}");
    }
    say!(out, "sure loss: {}", if report.sure_loss { "yes" } else { "no" });
    if let Some(p) = path {
        write_file(p, &to_json(&report))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub schema_version: u32,
    pub version: String,
    pub measures: IndexMap<String, MeasureResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<CredenceTable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub divergent: Vec<String>,
}

fn load_cosmo(spec: &str) -> Result<CosmoSpec, CliError> {
    let cosmo = if spec.starts_with("builtin:") {
        scenario_arg(spec)?.cosmo
    } else {
        let text = read(Path::new(spec))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{spec}: {e}")))?;
        if value.get("families").is_some() {
            let c: CosmoSpec = serde_path_to_error::deserialize(value)
                .map_err(|e| CliError::Input(format!("invalid config at `{}`: {}", e.path(), e.inner())))?;
            Some(c)
        } else {
            parse_scenario(&text)?.cosmo
        }
    };
    let cosmo = cosmo.ok_or_else(|| CliError::Input(format!("{spec} has no cosmo section")))?;
    cosmo.validate()?;
    Ok(cosmo)
}

fn cmd_measure(out: &mut dyn Write, config: &str, csv: Option<&Path>, samples: usize, path: Option<&Path>) -> CliResult {
    let cosmo = load_cosmo(config)?;
    let report = match normalize_families(&cosmo.families) {
        Ok(r) => MeasureReport {
            schema_version: SCHEMA_VERSION,
            version: tool_version().into(),
            measures: r.measures,
            table: r.table,
            divergent: r.divergent,
        },
        // Every measure is zero: report them, nothing to normalize.
        Err(CosmoError::NoSupport) => {
            let mut measures = IndexMap::new();
            for h in &cosmo.families {
                measures.insert(h.name.clone(), branch_measure(h)?);
            }
            MeasureReport { schema_version: SCHEMA_VERSION, version: tool_version().into(), measures, table: None, divergent: Vec::new() }
        }
        Err(e) => return Err(e.into()),
    };
    for (name, m) in &report.measures {
        let method = match m.method {
            crate::cosmo::Method::ClosedForm => "closed form",
            crate::cosmo::Method::Quadrature => "quadrature",
        };
        match m.value {
            MeasureValue::Finite(v) => say!(out, "{name}: {v:.12} ({method}, error {:.1e})", m.error_estimate),
            MeasureValue::Divergent => say!(out, "{name}: divergent ({method})"),
        }
    }
    match (&report.table, report.divergent.is_empty()) {
        (Some(t), _) => {
            say!(out, "normalized:");
            print_table(out, "  ", t)?;
        }
        (None, false) => say!(out, "no normalization: divergent families {}", report.divergent.join(", ")),
        (None, true) => say!(out, "no normalization: every measure is zero"),
    }
    if let Some(p) = csv {
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &cosmo.families, samples)?;
        write_file(p, &String::from_utf8(buf).expect("utf-8 csv"))?;
    }
    if let Some(p) = path {
        write_file(p, &to_json(&report))?;
    }
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Run { scenario, rule, at, out: path } => cmd_run(out, &scenario, rule, at, path.as_deref()),
        Command::Verify { suite, trials, seed, out: path } => cmd_verify(out, suite, trials, seed, path.as_deref()),
        Command::Dutchbook { scenario, book, rule, out: path } => {
            cmd_dutchbook(out, &scenario, book.as_deref(), rule, path.as_deref())
        }
        Command::Measure { config, csv, samples, out: path } => cmd_measure(out, &config, csv.as_deref(), samples, path.as_deref()),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
