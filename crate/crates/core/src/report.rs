//! Machine-readable run reports.

use serde::{Deserialize, Serialize};

use crate::credence::CredenceTable;
use crate::scenario::{run, solve, BranchSummary, Predicate, Query, Rule, Scenario, ScenarioError};

pub const SCHEMA_VERSION: u32 = 1;

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: Query,
    pub probability: f64,
    pub table: CredenceTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    /// Runs draw no random numbers; kept so every report carries one.
    pub seed: u64,
    pub scenario: String,
    /// The override applied to every query, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
    /// Tick of the branch summary.
    pub tick: u32,
    pub branches: Vec<BranchSummary>,
    pub queries: Vec<QueryResult>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn branch_weight_total(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }
}

/// The scenario's queries with `rule` and `at` forced onto each; without
/// queries, one "always" query per observer. Repeats after the override are
/// dropped.
pub fn effective_queries(sc: &Scenario, rule: Option<Rule>, at: Option<u32>) -> Vec<Query> {
    let base: Vec<Query> = if sc.queries.is_empty() {
        let t = at.unwrap_or_else(|| sc.final_event_tick());
        sc.observers.iter().map(|o| Query::new(t, &o.id, Predicate::Always, rule.unwrap_or(Rule::Born))).collect()
    } else {
        sc.queries.clone()
    };
    let mut out: Vec<Query> = Vec::new();
    for mut q in base {
        if let Some(r) = rule {
            q.rule = r;
        }
        if let Some(t) = at {
            q.time = t;
        }
        let same = |p: &Query| {
            p.time == q.time && p.observer == q.observer && p.hypothesis == q.hypothesis && p.rule == q.rule && p.evidence == q.evidence
        };
        if !out.iter().any(same) {
            out.push(q);
        }
    }
    out
}

/// Solve the effective queries and summarize the branches at `at` (or after
/// the last event).
pub fn run_report(sc: &Scenario, rule: Option<Rule>, at: Option<u32>) -> Result<RunReport, ScenarioError> {
    let tick = at.unwrap_or_else(|| sc.final_event_tick());
    let ws = run(sc, tick)?;
    let mut queries = Vec::new();
    for q in effective_queries(sc, rule, at) {
        let s = solve(sc, &q)?;
        queries.push(QueryResult { query: q, probability: s.probability, table: s.table });
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        version: tool_version().to_string(),
        seed: 0,
        scenario: sc.name.clone(),
        rule,
        tick,
        branches: ws.branches,
        queries,
    })
}
