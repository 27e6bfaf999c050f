use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::predicate::Cell;
use super::world::{run, CopyRecord, WorldState, ROOT_BRANCH};
use super::{Query, Result, Rule, Scenario, ScenarioError};
use crate::branching::{branch_decompose, decoherence_eps};
use crate::credence::{born_from_branches, strong_esp, uniform_over_copies, CredenceTable, ObserverCopy};

/// Copies of one observer holding the same evidence, across all ticks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopyClass {
    pub observer: String,
    pub time: u32,
    pub evidence: Vec<String>,
    pub members: Vec<CopyRecord>,
}

impl CopyClass {
    pub fn n_u(&self) -> usize {
        self.members.len()
    }

    pub fn n_uh(&self, h: &super::Predicate) -> Result<usize> {
        let mut n = 0;
        for m in &self.members {
            n += h.eval(&m.cell())? as usize;
        }
        Ok(n)
    }

    pub fn observer_copies(&self) -> Vec<ObserverCopy> {
        self.members.iter().map(|m| ObserverCopy::new(m.label(), &m.branch, m.time, m.weight)).collect()
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.members.iter().map(CopyRecord::cell).collect()
    }
}

/// The class of the copies of `observer` alive at `time`; they must all hold
/// the same evidence.
pub fn enumerate_copies(ws: &WorldState, observer: &str, time: u32) -> Result<CopyClass> {
    enumerate_copies_with(ws, observer, time, None)
}

/// Like [`enumerate_copies`], picking the class by `evidence` when given.
pub fn enumerate_copies_with(ws: &WorldState, observer: &str, time: u32, evidence: Option<&[String]>) -> Result<CopyClass> {
    let no_copies = || ScenarioError::NoCopies { observer: observer.to_string(), time };
    let evidence: Vec<String> = match evidence {
        Some(e) => e.to_vec(),
        None => {
            let mut labels: Vec<&Vec<String>> = Vec::new();
            for c in ws.copies_at(observer, time) {
                if !labels.contains(&&c.evidence) {
                    labels.push(&c.evidence);
                }
            }
            match labels.as_slice() {
                [] => return Err(no_copies()),
                [one] => (*one).clone(),
                many => {
                    return Err(ScenarioError::AmbiguousEvidence {
                        observer: observer.to_string(),
                        time,
                        labels: many.iter().map(|e| format!("[{}]", e.join(", "))).collect(),
                    })
                }
            }
        }
    };
    if !ws.copies_at(observer, time).any(|c| c.evidence == evidence) {
        return Err(no_copies());
    }
    let members: Vec<CopyRecord> = ws.copies.iter().filter(|c| c.observer == observer && c.evidence == evidence).cloned().collect();
    Ok(CopyClass { observer: observer.to_string(), time, evidence, members })
}

/// Answer to one query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub query: Query,
    pub cells: Vec<Cell>,
    pub table: CredenceTable,
    /// Probability of the query's hypothesis.
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<CopyClass>,
}

fn born_cells(sc: &Scenario, q: &Query) -> Result<(Vec<Cell>, CredenceTable)> {
    let ws = run(sc, q.time)?;
    if ws.pointers.is_empty() {
        let cell = Cell { label: ROOT_BRANCH.into(), branch: ROOT_BRANCH.into(), records: IndexMap::new(), copy: None, day: None, time: q.time };
        return Ok((vec![cell], CredenceTable::from_weights([(ROOT_BRANCH, 1.0)])?));
    }
    let mut keep: Vec<&str> = Vec::new();
    if let Some(s) = sc.observer(&q.observer).and_then(|o| o.subsystem.as_deref()) {
        keep.push(s);
    }
    for p in &ws.pointers {
        if !keep.contains(&p.as_str()) {
            keep.push(p);
        }
    }
    let pointers: Vec<&str> = ws.pointers.iter().map(String::as_str).collect();
    let rho = ws.state.reduced(&keep)?;
    let bs = branch_decompose(&rho, &pointers, decoherence_eps())?;
    let table = born_from_branches(&bs)?;
    let cells = bs
        .branches
        .iter()
        .map(|b| Cell {
            label: b.label.clone(),
            branch: b.label.clone(),
            records: ws.pointers.iter().cloned().zip(b.records.iter().cloned()).collect(),
            copy: None,
            day: None,
            time: q.time,
        })
        .collect();
    Ok((cells, table))
}

/// Credences of `q.observer` at `q.time` under `q.rule`.
///
/// Born reads the branches of the observer+detector reduced state at
/// `q.time`. The copy rules use the whole timeline: the class is every copy,
/// at any tick, holding the evidence of the copies alive at `q.time`.
pub fn solve(sc: &Scenario, q: &Query) -> Result<Solution> {
    let last = sc.last_tick();
    if q.time > last {
        return Err(ScenarioError::Unreachable { time: q.time, last });
    }
    if sc.observer(&q.observer).is_none() {
        return Err(ScenarioError::Link { field: "observer".into(), message: format!("unknown observer `{}`", q.observer) });
    }
    let (cells, table, class) = match q.rule {
        Rule::Born => {
            let (cells, table) = born_cells(sc, q)?;
            (cells, table, None)
        }
        Rule::Indifference | Rule::StrongEsp => {
            let ws = run(sc, q.time.max(sc.final_event_tick()))?;
            let class = enumerate_copies_with(&ws, &q.observer, q.time, q.evidence.as_deref())?;
            let copies = class.observer_copies();
            let table = if q.rule == Rule::StrongEsp { strong_esp(&copies)? } else { uniform_over_copies(&copies)? };
            (class.cells(), table, Some(class))
        }
    };
    let mut probability = 0.0;
    for c in &cells {
        if q.hypothesis.eval(c)? {
            probability += table.get(&c.label);
        }
    }
    Ok(Solution { query: q.clone(), cells, table, probability, class })
}

/// Solve every query declared in the scenario.
pub fn solve_all(sc: &Scenario) -> Result<Vec<Solution>> {
    sc.queries.iter().map(|q| solve(sc, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, Predicate};

    fn p(name: &str, time: u32, h: Predicate, rule: Rule) -> f64 {
        let sc = builtin(name).unwrap();
        let obs = sc.observers[0].id.clone();
        solve(&sc, &Query::new(time, obs, h, rule)).unwrap().probability
    }

    #[test]
    fn once_or_twice_counts() {
        let down = Predicate::record("D", "↓");
        assert!((p("once_or_twice", 2, down.clone(), Rule::Indifference) - 0.5).abs() < 1e-12);
        assert!((p("once_or_twice", 3, down.clone(), Rule::Indifference) - 1.0 / 3.0).abs() < 1e-12);
        assert!((p("once_or_twice", 3, down.clone(), Rule::Born) - 0.5).abs() < 1e-12);
        assert!((p("once_or_twice", 3, down, Rule::StrongEsp) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beauties() {
        let up = Predicate::record("D", "↑");
        assert!((p("two_branch_beauty", 4, up.clone(), Rule::StrongEsp) - 2.0 / 3.0).abs() < 1e-12);
        assert!((p("two_branch_beauty", 2, up.clone(), Rule::StrongEsp) - 2.0 / 3.0).abs() < 1e-12);
        let sc = builtin("three_branch_beauty").unwrap();
        let s = solve(&sc, &Query::new(4, "beauty", up, Rule::StrongEsp)).unwrap();
        let t = &s.table;
        assert!((t.get("beauty@↑,↑/Mon") - 0.25).abs() < 1e-12);
        assert!((t.get("beauty@↑,↓/Tue") - 0.25).abs() < 1e-12);
        assert!((t.get("beauty@↓,X/Mon") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dr_evil_halves() {
        let me = Predicate::copy("evil");
        assert_eq!(p("dr_evil", 0, me.clone(), Rule::Indifference), 1.0);
        assert!((p("dr_evil", 1, me.clone(), Rule::Indifference) - 0.5).abs() < 1e-15);
        assert!((p("dr_evil", 1, me.clone(), Rule::StrongEsp) - 0.5).abs() < 1e-15);
        let sc = builtin("dr_evil").unwrap();
        let err = solve(&sc, &Query::new(1, "evil", me, Rule::Born)).unwrap_err();
        assert!(matches!(err, ScenarioError::NotDecidable(_)));
    }

    #[test]
    fn observing_splits_evidence() {
        let sc = builtin("once_or_twice").unwrap();
        let q = Query::new(4, "alice", Predicate::record("D", "↓"), Rule::Indifference);
        assert!(matches!(solve(&sc, &q), Err(ScenarioError::AmbiguousEvidence { .. })));
        let mut q = q;
        q.evidence = Some(vec!["clock:4".into(), "D=↑".into()]);
        let s = solve(&sc, &q).unwrap();
        assert_eq!(s.class.unwrap().n_u(), 2);
        assert_eq!(s.probability, 0.0);
    }

    #[test]
    fn unreachable_time() {
        let sc = builtin("once").unwrap();
        let q = Query::new(6, "alice", Predicate::Always, Rule::Born);
        assert!(matches!(solve(&sc, &q), Err(ScenarioError::Unreachable { .. })));
    }
}
