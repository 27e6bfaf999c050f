//! Bets, Dutch books and Bayesian confirmation.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credence::CredenceTable;
use crate::scenario::{run, solve, Cell, Predicate, Query, Rule, Scenario, ScenarioError};

/// Expected values at least this far below zero reject a bet; anything
/// closer to zero is a fair bet and is accepted.
pub const ACCEPT_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpistemicError {
    #[error("payoffs do not partition the hypotheses: {0}")]
    PartitionMismatch(String),
    #[error("observed outcome `{0}` has zero probability under every theory")]
    ZeroEvidence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub type Result<T> = std::result::Result<T, EpistemicError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payoff {
    pub label: String,
    pub when: Predicate,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bet {
    pub id: String,
    pub offered_at: u32,
    #[serde(default)]
    pub cost: f64,
    pub payoffs: Vec<Payoff>,
    /// Who is offered the bet; defaults to the scenario's first observer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<String>,
}

impl Bet {
    pub fn new(id: impl Into<String>, offered_at: u32, cost: f64) -> Self {
        Self { id: id.into(), offered_at, cost, payoffs: Vec::new(), observer: None }
    }

    pub fn pays(mut self, label: impl Into<String>, when: Predicate, amount: f64) -> Self {
        self.payoffs.push(Payoff { label: label.into(), when, amount });
        self
    }

    pub fn amount(&self, label: &str) -> Option<f64> {
        self.payoffs.iter().find(|p| p.label == label).map(|p| p.amount)
    }

    /// The single payoff whose predicate holds in `cell`.
    pub fn settle(&self, cell: &Cell) -> Result<&Payoff> {
        let mut hit: Option<&Payoff> = None;
        for p in &self.payoffs {
            if p.when.eval(cell)? {
                if let Some(prev) = hit {
                    return Err(EpistemicError::PartitionMismatch(format!(
                        "`{}` and `{}` both hold in `{}`",
                        prev.label, p.label, cell.label
                    )));
                }
                hit = Some(p);
            }
        }
        hit.ok_or_else(|| EpistemicError::PartitionMismatch(format!("no payoff of `{}` covers `{}`", self.id, cell.label)))
    }

    /// Credences over payoff labels from credences over cells.
    pub fn project(&self, cells: &[Cell], table: &CredenceTable) -> Result<CredenceTable> {
        let mut entries: IndexMap<String, f64> = self.payoffs.iter().map(|p| (p.label.clone(), 0.0)).collect();
        for c in cells {
            let p = self.settle(c)?;
            *entries.get_mut(&p.label).expect("payoff label") += table.get(&c.label);
        }
        Ok(CredenceTable { entries })
    }
}

/// `Σ P(h)·payoff(h) − cost` over the payoff labels of `b`.
pub fn expected_value(b: &Bet, c: &CredenceTable) -> Result<f64> {
    let mut ev = 0.0;
    for (label, p) in c.iter() {
        match b.amount(label) {
            Some(a) => ev += p * a,
            None if p == 0.0 => {}
            None => return Err(EpistemicError::PartitionMismatch(format!("`{label}` has no payoff"))),
        }
    }
    Ok(ev - b.cost)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetDecision {
    pub id: String,
    pub offered_at: u32,
    pub observer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credences: Option<CredenceTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_value: Option<f64>,
    pub accepted: bool,
    /// Why the bet could not be evaluated, if it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BookReport {
    pub scenario: String,
    pub rule: Rule,
    pub decisions: Vec<BetDecision>,
    /// Net payoff per surviving copy, keyed `copy@branch`.
    pub nets: IndexMap<String, f64>,
    pub sure_loss: bool,
}

fn bet_observer(sc: &Scenario, b: &Bet) -> Result<String> {
    match &b.observer {
        Some(o) if sc.observer(o).is_some() => Ok(o.clone()),
        Some(o) => Err(EpistemicError::InvalidInput(format!("bet `{}` names unknown observer `{o}`", b.id))),
        None => sc
            .observers
            .first()
            .map(|o| o.id.clone())
            .ok_or_else(|| EpistemicError::InvalidInput(format!("bet `{}` has no observer to offer it to", b.id))),
    }
}

/// Offer each bet at its tick, accept when its expected value under `rule`
/// is not negative, and settle accepted bets on every copy alive after the
/// last event.
///
/// A bet whose payoffs the rule cannot evaluate (copy identities under the
/// Born rule) is declined.
pub fn dutch_book_check(sc: &Scenario, rule: Rule, book: &[Bet]) -> Result<BookReport> {
    let last = sc.last_tick();
    let mut decisions = Vec::with_capacity(book.len());
    for b in book {
        if b.offered_at > last {
            return Err(EpistemicError::InvalidInput(format!("bet `{}` is offered at t{} after t{last}", b.id, b.offered_at)));
        }
        if b.payoffs.is_empty() && b.cost == 0.0 {
            return Err(EpistemicError::InvalidInput(format!("bet `{}` has no payoffs", b.id)));
        }
        let observer = bet_observer(sc, b)?;
        let q = Query::new(b.offered_at, &observer, Predicate::Always, rule);
        let sol = solve(sc, &q)?;
        let decision = match b.project(&sol.cells, &sol.table) {
            Ok(credences) => {
                let ev = expected_value(b, &credences)?;
                BetDecision {
                    id: b.id.clone(),
                    offered_at: b.offered_at,
                    observer,
                    credences: Some(credences),
                    expected_value: Some(ev),
                    accepted: ev >= -ACCEPT_TOL,
                    note: None,
                }
            }
            Err(EpistemicError::Scenario(ScenarioError::NotDecidable(why))) => BetDecision {
                id: b.id.clone(),
                offered_at: b.offered_at,
                observer,
                credences: None,
                expected_value: None,
                accepted: false,
                note: Some(format!("{rule} cannot evaluate {why}")),
            },
            Err(e) => return Err(e),
        };
        decisions.push(decision);
    }

    let settle_at = book.iter().map(|b| b.offered_at).max().unwrap_or(0).max(sc.final_event_tick());
    let ws = run(sc, settle_at)?;
    let mut observers: Vec<String> = decisions.iter().map(|d| d.observer.clone()).collect();
    if observers.is_empty() {
        observers.extend(sc.observers.first().map(|o| o.id.clone()));
    }
    observers.dedup();
    let mut nets: IndexMap<String, f64> = IndexMap::new();
    for l in ws.lineages.iter().filter(|l| observers.contains(&l.observer)) {
        nets.insert(l.label(), 0.0);
    }
    for (b, d) in book.iter().zip(&decisions) {
        if !d.accepted {
            continue;
        }
        for l in ws.lineages_of(&d.observer) {
            let p = b.settle(&l.cell(settle_at))?;
            *nets.get_mut(&l.label()).expect("net per lineage") += p.amount - b.cost;
        }
    }
    let sure_loss = !nets.is_empty() && nets.values().all(|&v| v < 0.0);
    Ok(BookReport { scenario: sc.name.clone(), rule, decisions, nets, sure_loss })
}

fn check_distribution(what: &str, p: &IndexMap<String, f64>) -> Result<()> {
    if p.values().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(EpistemicError::InvalidInput(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(EpistemicError::InvalidInput(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Multiply priors by `weights` and renormalize.
pub fn conditionalize(priors: &IndexMap<String, f64>, weights: &IndexMap<String, f64>, observed: &str) -> Result<IndexMap<String, f64>> {
    let joint: IndexMap<String, f64> =
        priors.iter().map(|(t, p)| (t.clone(), p * weights.get(t).copied().unwrap_or(0.0))).collect();
    let evidence: f64 = joint.values().sum();
    if !(evidence > 0.0) {
        return Err(EpistemicError::ZeroEvidence(observed.to_string()));
    }
    Ok(joint.into_iter().map(|(t, j)| (t, j / evidence)).collect())
}

/// Posterior over theories after observing `observed`.
pub fn bayes_update(
    priors: &IndexMap<String, f64>,
    likelihoods: &IndexMap<String, IndexMap<String, f64>>,
    observed: &str,
) -> Result<IndexMap<String, f64>> {
    check_distribution("priors", priors)?;
    let mut weights = IndexMap::new();
    for t in priors.keys() {
        let row = likelihoods
            .get(t)
            .ok_or_else(|| EpistemicError::InvalidInput(format!("no likelihoods for theory `{t}`")))?;
        check_distribution(&format!("likelihoods of `{t}`"), row)?;
        weights.insert(t.clone(), row.get(observed).copied().unwrap_or(0.0));
    }
    conditionalize(priors, &weights, observed)
}

/// Posteriors after each outcome of a run of independent trials.
pub fn confirm_sequence(
    priors: &IndexMap<String, f64>,
    likelihoods: &IndexMap<String, IndexMap<String, f64>>,
    outcomes: &[String],
) -> Result<Vec<IndexMap<String, f64>>> {
    let mut current = priors.clone();
    let mut out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        current = bayes_update(&current, likelihoods, o)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Priors of the scenario's theories.
pub fn theory_priors(sc: &Scenario) -> IndexMap<String, f64> {
    sc.theories.iter().map(|t| (t.name.clone(), t.prior)).collect()
}

/// Born probability of each record of `detector` at `time`, per theory.
pub fn theory_likelihoods(sc: &Scenario, detector: &str, time: u32) -> Result<IndexMap<String, IndexMap<String, f64>>> {
    if sc.theories.is_empty() {
        return Err(EpistemicError::InvalidInput(format!("`{}` declares no theories", sc.name)));
    }
    let mut out = IndexMap::new();
    for t in &sc.theories {
        let ws = crate::scenario::run_with_initial(sc, time, &t.initial)?;
        let mut row: IndexMap<String, f64> = IndexMap::new();
        for b in &ws.branches {
            let rec = b
                .records
                .get(detector)
                .ok_or_else(|| EpistemicError::InvalidInput(format!("`{detector}` has not recorded at t{time}")))?;
            *row.entry(rec.clone()).or_insert(0.0) += b.weight;
        }
        let total: f64 = row.values().sum();
        row.values_mut().for_each(|v| *v /= total);
        out.insert(t.name.clone(), row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(xs: &[(&str, f64)]) -> IndexMap<String, f64> {
        xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn fifty_dollar_bet() {
        let b = Bet::new("b", 1, 20.0).pays("down", Predicate::record("D", "↓"), 50.0).pays("up", Predicate::record("D", "↑"), 0.0);
        let c = CredenceTable { entries: map(&[("up", 0.5), ("down", 0.5)]) };
        assert_eq!(expected_value(&b, &c).unwrap(), 5.0);
    }

    #[test]
    fn no_payoffs_costs_the_price() {
        let b = Bet::new("b", 1, 3.0);
        assert_eq!(expected_value(&b, &CredenceTable::default()).unwrap(), -3.0);
        let c = CredenceTable { entries: map(&[("up", 1.0)]) };
        assert!(matches!(expected_value(&b, &c), Err(EpistemicError::PartitionMismatch(_))));
    }

    #[test]
    fn overlapping_payoffs() {
        let b = Bet::new("b", 1, 0.0).pays("x", Predicate::Always, 1.0).pays("y", Predicate::Always, 2.0);
        let cell = Cell { label: "c".into(), branch: "c".into(), records: IndexMap::new(), copy: None, day: None, time: 0 };
        assert!(matches!(b.settle(&cell), Err(EpistemicError::PartitionMismatch(_))));
    }

    #[test]
    fn single_update() {
        let priors = map(&[("P↑", 0.5), ("P↓", 0.5)]);
        let mut lik = IndexMap::new();
        lik.insert("P↑".to_string(), map(&[("↑", 0.9), ("↓", 0.1)]));
        lik.insert("P↓".to_string(), map(&[("↑", 0.1), ("↓", 0.9)]));
        let post = bayes_update(&priors, &lik, "↑").unwrap();
        assert!((post["P↑"] - 0.9).abs() < 1e-12);
        let zero = {
            let mut l = lik.clone();
            l.insert("P↑".into(), map(&[("↓", 1.0)]));
            l.insert("P↓".into(), map(&[("↓", 1.0)]));
            l
        };
        assert_eq!(bayes_update(&priors, &zero, "↑").unwrap_err(), EpistemicError::ZeroEvidence("↑".into()));
    }

    #[test]
    fn flat_likelihoods_keep_priors() {
        let priors = map(&[("a", 0.3), ("b", 0.7)]);
        let mut lik = IndexMap::new();
        lik.insert("a".to_string(), map(&[("x", 0.5), ("y", 0.5)]));
        lik.insert("b".to_string(), map(&[("x", 0.5), ("y", 0.5)]));
        let traj = confirm_sequence(&priors, &lik, &["x".into()]).unwrap();
        assert!((traj[0]["a"] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn quantum_book() {
        let sc = crate::scenario::builtin("appendix_a_book").unwrap();
        let r = dutch_book_check(&sc, Rule::Indifference, &sc.bets).unwrap();
        assert!(r.decisions.iter().all(|d| d.accepted));
        assert_eq!(r.nets.len(), 3);
        assert!(r.nets.values().all(|v| (v + 5.0).abs() < 1e-12), "{:?}", r.nets);
        assert!(r.sure_loss);
        let r = dutch_book_check(&sc, Rule::Born, &sc.bets).unwrap();
        assert!(r.decisions[0].accepted && !r.decisions[1].accepted);
        assert!((r.decisions[1].expected_value.unwrap() + 5.0).abs() < 1e-12);
        assert!(!r.sure_loss);
    }

    #[test]
    fn dr_evil_book() {
        let sc = crate::scenario::builtin("dr_evil_book").unwrap();
        for rule in [Rule::Indifference, Rule::StrongEsp] {
            let r = dutch_book_check(&sc, rule, &sc.bets).unwrap();
            assert_eq!(r.nets.len(), 2);
            assert!(r.nets.values().all(|&v| v == -100.0), "{:?}", r.nets);
            assert!(r.sure_loss);
        }
        let r = dutch_book_check(&sc, Rule::Born, &sc.bets).unwrap();
        assert!(r.decisions.iter().all(|d| !d.accepted && d.note.is_some()));
        assert!(!r.sure_loss);
    }

    #[test]
    fn empty_book() {
        let sc = crate::scenario::builtin("once_or_twice").unwrap();
        let r = dutch_book_check(&sc, Rule::Indifference, &[]).unwrap();
        assert!(r.decisions.is_empty() && !r.sure_loss);
    }

    #[test]
    fn wave_function_likelihoods() {
        let sc = crate::scenario::builtin("what_wave_function").unwrap();
        let lik = theory_likelihoods(&sc, "D", 2).unwrap();
        assert!((lik["P↑"]["↑"] - 0.9).abs() < 1e-12);
        let post = bayes_update(&theory_priors(&sc), &lik, "↑").unwrap();
        assert!((post["P↑"] - 0.9).abs() < 1e-12);
    }
}
