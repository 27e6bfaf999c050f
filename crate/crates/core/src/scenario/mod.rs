//! Declarative scenarios: a state, a timeline of events, observers, bets
//! and queries.
//!
//! Ticks are integers. Tick 0 is the initial state; the state at tick `t`
//! includes every event with `time ≤ t`.

mod builtin;
mod predicate;
mod solve;
mod world;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branching::BranchError;
use crate::cosmo::CosmoSpec;
use crate::credence::CredenceError;
use crate::epistemics::Bet;
use crate::qstate::{QStateError, C64};

pub use builtin::{builtin, builtin_names};
pub use predicate::{Cell, Predicate};
pub use solve::{enumerate_copies, enumerate_copies_with, solve, solve_all, CopyClass, Solution};
pub use world::{run, run_with_initial, BranchSummary, CopyRecord, Lineage, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("`{field}`: {message}")]
    Link { field: String, message: String },
    #[error("event at t{time}: {message}")]
    Event { time: u32, message: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("observer `{observer}` has no live copy at t{time}")]
    NoCopies { observer: String, time: u32 },
    #[error("copies of `{observer}` at t{time} hold different evidence: {labels:?}")]
    AmbiguousEvidence { observer: String, time: u32, labels: Vec<String> },
    #[error("not decidable: {0}")]
    NotDecidable(String),
    #[error("t{time} is past the last reachable tick t{last}")]
    Unreachable { time: u32, last: u32 },
    #[error(transparent)]
    Credence(#[from] CredenceError),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    State(#[from] QStateError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amp {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Amp {
    pub fn c64(self) -> C64 {
        C64::new(self.re, self.im)
    }
}

impl From<C64> for Amp {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub label: String,
    pub dim: usize,
    /// Ket names; ket 0 is the ready state. Defaults to `0, 1, …`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kets: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub subsystem: String,
    pub amplitudes: Vec<Amp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub id: String,
    /// Subsystem holding the observer's records, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsystem: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub detector: String,
    pub is: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareEvent {
    pub time: u32,
    pub subsystem: String,
    pub amplitudes: Vec<Amp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureEvent {
    pub time: u32,
    pub system: String,
    pub detector: String,
    pub env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    /// Measurement basis as a list of columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<Amp>>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub leakage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalMeasureEvent {
    pub time: u32,
    pub condition: Vec<Condition>,
    pub system: String,
    pub detector: String,
    pub env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEntry {
    pub records: Vec<String>,
    pub symbol: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEvent {
    pub time: u32,
    pub sources: Vec<String>,
    pub display: String,
    pub map: Vec<WireEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveEvent {
    pub time: u32,
    pub observer: String,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EraseMemoryEvent {
    pub time: u32,
    pub observer: String,
    /// Number of leading memory entries that survive.
    #[serde(default)]
    pub keep: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Predicate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuplicateEvent {
    pub time: u32,
    pub observer: String,
    pub copy: String,
    /// Which copies split; by default the observer's original copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Predicate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WakeOnEvent {
    pub time: u32,
    pub observer: String,
    #[serde(default)]
    pub when: Predicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelocateEvent {
    pub time: u32,
    pub observer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copy: Option<String>,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Prepare(PrepareEvent),
    Measure(MeasureEvent),
    ConditionalMeasure(ConditionalMeasureEvent),
    Wire(WireEvent),
    Observe(ObserveEvent),
    EraseMemory(EraseMemoryEvent),
    Duplicate(DuplicateEvent),
    WakeOn(WakeOnEvent),
    Relocate(RelocateEvent),
}

impl Event {
    pub fn time(&self) -> u32 {
        match self {
            Self::Prepare(e) => e.time,
            Self::Measure(e) => e.time,
            Self::ConditionalMeasure(e) => e.time,
            Self::Wire(e) => e.time,
            Self::Observe(e) => e.time,
            Self::EraseMemory(e) => e.time,
            Self::Duplicate(e) => e.time,
            Self::WakeOn(e) => e.time,
            Self::Relocate(e) => e.time,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Prepare(_) => "prepare",
            Self::Measure(_) => "measure",
            Self::ConditionalMeasure(_) => "conditional_measure",
            Self::Wire(_) => "wire",
            Self::Observe(_) => "observe",
            Self::EraseMemory(_) => "erase_memory",
            Self::Duplicate(_) => "duplicate",
            Self::WakeOn(_) => "wake_on",
            Self::Relocate(_) => "relocate",
        }
    }

    fn observer(&self) -> Option<&str> {
        match self {
            Self::Observe(e) => Some(&e.observer),
            Self::EraseMemory(e) => Some(&e.observer),
            Self::Duplicate(e) => Some(&e.observer),
            Self::WakeOn(e) => Some(&e.observer),
            Self::Relocate(e) => Some(&e.observer),
            _ => None,
        }
    }

    fn predicate(&self) -> Option<&Predicate> {
        match self {
            Self::EraseMemory(e) => e.when.as_ref(),
            Self::Duplicate(e) => e.when.as_ref(),
            Self::WakeOn(e) => Some(&e.when),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "born")]
    Born,
    #[serde(rename = "indifference")]
    Indifference,
    #[serde(rename = "strong-esp", alias = "strong_esp")]
    StrongEsp,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Born, Rule::Indifference, Rule::StrongEsp];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Born => "born",
            Rule::Indifference => "indifference",
            Rule::StrongEsp => "strong-esp",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "born" => Ok(Rule::Born),
            "indifference" => Ok(Rule::Indifference),
            "strong-esp" | "strong_esp" => Ok(Rule::StrongEsp),
            other => Err(format!("unknown rule `{other}` (expected born, indifference or strong-esp)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub time: u32,
    pub observer: String,
    #[serde(default)]
    pub hypothesis: Predicate,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Evidence label to condition on when copies at `time` disagree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Vec<String>>,
}

impl Query {
    pub fn new(time: u32, observer: impl Into<String>, hypothesis: Predicate, rule: Rule) -> Self {
        Self { time, observer: observer.into(), hypothesis, rule, label: None, evidence: None }
    }
}

/// A rival hypothesis about the initial state, for confirmation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub name: String,
    pub prior: f64,
    /// Overrides of the scenario's `initial` entries.
    pub initial: Vec<InitialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    pub initial: Vec<InitialSpec>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub observers: Vec<ObserverSpec>,
    #[serde(default)]
    pub bets: Vec<Bet>,
    #[serde(default)]
    pub queries: Vec<Query>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theories: Vec<TheorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosmo: Option<CosmoSpec>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Parse { path, message: e.into_inner().to_string() }
    })?;
    sc.validate()?;
    Ok(sc)
}

/// Pretty JSON form of a scenario.
pub fn serialize_scenario(sc: &Scenario) -> String {
    serde_json::to_string_pretty(sc).expect("scenarios always serialize")
}

fn link(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Link { field: field.into(), message: message.into() }
}

impl Scenario {
    pub fn subsystem(&self, label: &str) -> Option<&SubsystemSpec> {
        self.subsystems.iter().find(|s| s.label == label)
    }

    pub fn observer(&self, id: &str) -> Option<&ObserverSpec> {
        self.observers.iter().find(|o| o.id == id)
    }

    /// Last tick at which the state can be inspected.
    pub fn last_tick(&self) -> u32 {
        self.events.last().map_or(1, |e| e.time() + 1)
    }

    /// Tick of the last event, or 0 without events.
    pub fn final_event_tick(&self) -> u32 {
        self.events.last().map_or(0, Event::time)
    }

    /// Observers woken by `wake_on` events rather than present at every tick.
    pub fn is_sleeper(&self, observer: &str) -> bool {
        self.events.iter().any(|e| matches!(e, Event::WakeOn(w) if w.observer == observer))
    }

    /// Detectors written by measurements, in event order.
    pub fn detectors(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.events {
            let d = match e {
                Event::Measure(m) => &m.detector,
                Event::ConditionalMeasure(m) => &m.detector,
                _ => continue,
            };
            if !out.contains(&d.as_str()) {
                out.push(d);
            }
        }
        out
    }

    /// Check every cross-reference and numeric invariant.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, s) in self.subsystems.iter().enumerate() {
            let f = format!("subsystems[{i}]");
            if s.label.is_empty() {
                return Err(link(format!("{f}.label"), "empty label"));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(link(format!("{f}.label"), format!("`{}` declared twice", s.label)));
            }
            if s.dim == 0 {
                return Err(link(format!("{f}.dim"), "dimension must be positive"));
            }
            if let Some(k) = &s.kets {
                if k.len() != s.dim {
                    return Err(link(format!("{f}.kets"), format!("{} names for dimension {}", k.len(), s.dim)));
                }
                let uniq: HashSet<&String> = k.iter().collect();
                if uniq.len() != k.len() {
                    return Err(link(format!("{f}.kets"), "repeated ket name"));
                }
            }
        }
        let sub = |field: String, name: &str| -> Result<&SubsystemSpec> {
            self.subsystem(name).ok_or_else(|| link(field, format!("unknown subsystem `{name}`")))
        };
        let check_amps = |field: String, dim: usize, amps: &[Amp]| -> Result<()> {
            if amps.len() != dim {
                return Err(link(field, format!("{} amplitudes for dimension {dim}", amps.len())));
            }
            let n: f64 = amps.iter().map(|a| a.c64().norm_sqr()).sum();
            if !n.is_finite() || (n - 1.0).abs() > 1e-8 {
                return Err(link(field, format!("amplitudes have squared norm {n}, not 1")));
            }
            Ok(())
        };
        let mut init_seen = HashSet::new();
        for (i, init) in self.initial.iter().enumerate() {
            let s = sub(format!("initial[{i}].subsystem"), &init.subsystem)?;
            if !init_seen.insert(init.subsystem.as_str()) {
                return Err(link(format!("initial[{i}].subsystem"), format!("`{}` initialised twice", init.subsystem)));
            }
            check_amps(format!("initial[{i}].amplitudes"), s.dim, &init.amplitudes)?;
        }
        for (i, t) in self.theories.iter().enumerate() {
            if !(t.prior >= 0.0 && t.prior <= 1.0) {
                return Err(link(format!("theories[{i}].prior"), format!("prior {} outside [0, 1]", t.prior)));
            }
            for (j, init) in t.initial.iter().enumerate() {
                let s = sub(format!("theories[{i}].initial[{j}].subsystem"), &init.subsystem)?;
                check_amps(format!("theories[{i}].initial[{j}].amplitudes"), s.dim, &init.amplitudes)?;
            }
        }
        if !self.theories.is_empty() {
            let total: f64 = self.theories.iter().map(|t| t.prior).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(link("theories", format!("priors sum to {total}, not 1")));
            }
        }

        let mut ids = HashSet::new();
        for (i, o) in self.observers.iter().enumerate() {
            if !ids.insert(o.id.as_str()) {
                return Err(link(format!("observers[{i}].id"), format!("`{}` declared twice", o.id)));
            }
            if let Some(s) = &o.subsystem {
                sub(format!("observers[{i}].subsystem"), s)?;
            }
        }
        let observer = |field: String, id: &str| -> Result<()> {
            if self.observer(id).is_none() {
                return Err(link(field, format!("unknown observer `{id}`")));
            }
            Ok(())
        };

        let mut recorded: Vec<&str> = Vec::new();
        let mut last: Option<u32> = None;
        for (i, e) in self.events.iter().enumerate() {
            let f = format!("events[{i}]");
            if e.time() == 0 {
                return Err(link(format!("{f}.time"), "events start at t1; t0 is the initial state"));
            }
            if last.is_some_and(|l| e.time() <= l) {
                return Err(link(format!("{f}.time"), "event times must be strictly increasing"));
            }
            last = Some(e.time());
            if let Some(o) = e.observer() {
                observer(format!("{f}.observer"), o)?;
            }
            if let Some(p) = e.predicate() {
                self.check_predicate(&format!("{f}.when"), p)?;
            }
            match e {
                Event::Prepare(p) => {
                    let s = sub(format!("{f}.subsystem"), &p.subsystem)?;
                    check_amps(format!("{f}.amplitudes"), s.dim, &p.amplitudes)?;
                }
                Event::Measure(m) => {
                    let s = sub(format!("{f}.system"), &m.system)?;
                    sub(format!("{f}.detector"), &m.detector)?;
                    sub(format!("{f}.env"), &m.env)?;
                    if let Some(b) = &m.basis {
                        if b.len() != s.dim || b.iter().any(|c| c.len() != s.dim) {
                            return Err(link(format!("{f}.basis"), format!("basis must be {0}×{0}", s.dim)));
                        }
                    }
                    if !(0.0..1.0).contains(&m.leakage) {
                        return Err(link(format!("{f}.leakage"), "leakage must lie in [0, 1)"));
                    }
                    recorded.push(&m.detector);
                }
                Event::ConditionalMeasure(m) => {
                    sub(format!("{f}.system"), &m.system)?;
                    sub(format!("{f}.detector"), &m.detector)?;
                    sub(format!("{f}.env"), &m.env)?;
                    if m.condition.is_empty() {
                        return Err(link(format!("{f}.condition"), "empty condition"));
                    }
                    for (j, c) in m.condition.iter().enumerate() {
                        if !recorded.contains(&c.detector.as_str()) {
                            return Err(link(
                                format!("{f}.condition[{j}].detector"),
                                format!("`{}` is not written by an earlier measurement", c.detector),
                            ));
                        }
                    }
                    recorded.push(&m.detector);
                }
                Event::Wire(w) => {
                    for (j, s) in w.sources.iter().enumerate() {
                        sub(format!("{f}.sources[{j}]"), s)?;
                    }
                    sub(format!("{f}.display"), &w.display)?;
                    for (j, entry) in w.map.iter().enumerate() {
                        if entry.records.len() != w.sources.len() {
                            return Err(link(format!("{f}.map[{j}].records"), "one record per source expected"));
                        }
                    }
                }
                Event::Observe(o) => {
                    sub(format!("{f}.target"), &o.target)?;
                }
                Event::Duplicate(d) => {
                    if d.copy.is_empty() {
                        return Err(link(format!("{f}.copy"), "empty copy id"));
                    }
                }
                Event::EraseMemory(_) | Event::WakeOn(_) | Event::Relocate(_) => {}
            }
        }

        for (i, q) in self.queries.iter().enumerate() {
            observer(format!("queries[{i}].observer"), &q.observer)?;
            self.check_predicate(&format!("queries[{i}].hypothesis"), &q.hypothesis)?;
        }
        for (i, b) in self.bets.iter().enumerate() {
            if let Some(o) = &b.observer {
                observer(format!("bets[{i}].observer"), o)?;
            }
            for (j, p) in b.payoffs.iter().enumerate() {
                self.check_predicate(&format!("bets[{i}].payoffs[{j}].when"), &p.when)?;
            }
        }
        if let Some(c) = &self.cosmo {
            c.validate().map_err(|e| link("cosmo", e.to_string()))?;
        }
        Ok(())
    }

    fn check_predicate(&self, field: &str, p: &Predicate) -> Result<()> {
        for d in p.detectors() {
            if self.subsystem(d).is_none() {
                return Err(link(field, format!("unknown subsystem `{d}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_events_is_valid() {
        let sc = parse_scenario(r#"{"name":"blank"}"#).unwrap();
        assert!(sc.events.is_empty());
        assert_eq!(sc.last_tick(), 1);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = parse_scenario(r#"{"name":"x","events":[{"time":1,"kind":"measure","system":"a","detector":"D","env":"E","colour":1}]}"#)
            .unwrap_err();
        match err {
            ScenarioError::Parse { path, .. } => assert!(path.starts_with("events[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_reference_names_field() {
        let err = parse_scenario(
            r#"{"name":"x","subsystems":[{"label":"a","dim":2}],"events":[{"time":1,"kind":"measure","system":"a","detector":"D","env":"a"}]}"#,
        )
        .unwrap_err();
        assert_eq!(err, link("events[0].detector", "unknown subsystem `D`"));
    }

    #[test]
    fn times_must_increase() {
        let doc = r#"{"name":"x","observers":[{"id":"o"}],"events":[
            {"time":2,"kind":"relocate","observer":"o","to":"a"},
            {"time":2,"kind":"relocate","observer":"o","to":"b"}]}"#;
        assert!(matches!(parse_scenario(doc), Err(ScenarioError::Link { .. })));
    }

    #[test]
    fn unnormalized_amplitudes_rejected() {
        let doc = r#"{"name":"x","subsystems":[{"label":"a","dim":2}],"initial":[{"subsystem":"a","amplitudes":[{"re":1},{"re":1}]}]}"#;
        assert!(matches!(parse_scenario(doc), Err(ScenarioError::Link { .. })));
    }

    #[test]
    fn conditional_needs_earlier_measure() {
        let doc = r#"{"name":"x","subsystems":[{"label":"a","dim":2},{"label":"D","dim":4},{"label":"E","dim":4}],
            "events":[{"time":1,"kind":"conditional_measure","condition":[{"detector":"D","is":"1"}],"system":"a","detector":"D","env":"E"}]}"#;
        let err = parse_scenario(doc).unwrap_err();
        assert!(matches!(err, ScenarioError::Link { ref field, .. } if field == "events[0].condition[0].detector"), "{err:?}");
    }

    #[test]
    fn rule_names() {
        for r in Rule::ALL {
            assert_eq!(r.name().parse::<Rule>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.name()));
        }
        assert_eq!(serde_json::from_str::<Rule>("\"strong_esp\"").unwrap(), Rule::StrongEsp);
    }
}
