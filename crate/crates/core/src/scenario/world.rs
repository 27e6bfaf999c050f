use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Event, InitialSpec, Predicate, Result, Scenario, ScenarioError};
use super::predicate::Cell;
use crate::branching::{
    apply_wiring, conditional_measure, decoherence_eps, measure, state_branches, BranchError, Measurement, Wiring,
};
use crate::qstate::{Space, StateVector, SubsystemLabel, UnitaryOp, C64};

const SUPPORT_TOL: f64 = 1e-14;

/// Branch label used while no detector has recorded anything.
pub const ROOT_BRANCH: &str = "∅";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub label: String,
    pub records: IndexMap<String, String>,
    pub weight: f64,
}

/// One continuing copy of an observer on one branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub observer: String,
    pub copy: String,
    pub branch: String,
    pub records: IndexMap<String, String>,
    pub memory: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

/// An observer copy that exists at `time`, with the evidence it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopyRecord {
    pub observer: String,
    pub copy: String,
    pub branch: String,
    pub records: IndexMap<String, String>,
    pub time: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<String>,
    pub weight: f64,
    pub evidence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl CopyRecord {
    /// Unique label: copy, branch, and day (or tick).
    pub fn label(&self) -> String {
        match &self.day {
            Some(d) => format!("{}@{}/{}", self.copy, self.branch, d),
            None => format!("{}@{}/t{}", self.copy, self.branch, self.time),
        }
    }

    pub fn cell(&self) -> Cell {
        Cell {
            label: self.label(),
            branch: self.branch.clone(),
            records: self.records.clone(),
            copy: Some(self.copy.clone()),
            day: self.day.clone(),
            time: self.time,
        }
    }
}

impl Lineage {
    pub fn label(&self) -> String {
        format!("{}@{}", self.copy, self.branch)
    }

    pub fn cell(&self, time: u32) -> Cell {
        Cell {
            label: self.label(),
            branch: self.branch.clone(),
            records: self.records.clone(),
            copy: Some(self.copy.clone()),
            day: None,
            time,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub tick: u32,
    pub state: StateVector,
    /// Detectors that have recorded, in event order.
    pub pointers: Vec<String>,
    pub branches: Vec<BranchSummary>,
    pub lineages: Vec<Lineage>,
    /// Every copy registered at ticks `0..=tick`.
    pub copies: Vec<CopyRecord>,
    pub log: Vec<String>,
}

impl WorldState {
    pub fn branch(&self, label: &str) -> Option<&BranchSummary> {
        self.branches.iter().find(|b| b.label == label)
    }

    /// Copies of `observer` registered at exactly `time`.
    pub fn copies_at<'a>(&'a self, observer: &'a str, time: u32) -> impl Iterator<Item = &'a CopyRecord> + 'a {
        self.copies.iter().filter(move |c| c.observer == observer && c.time == time)
    }

    pub fn lineages_of<'a>(&'a self, observer: &'a str) -> impl Iterator<Item = &'a Lineage> + 'a {
        self.lineages.iter().filter(move |l| l.observer == observer)
    }
}

fn event_err(time: u32, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Event { time, message: message.into() }
}

fn wrap(time: u32) -> impl Fn(BranchError) -> ScenarioError {
    move |e| event_err(time, e.to_string())
}

pub(crate) fn labels(sc: &Scenario) -> Result<Vec<SubsystemLabel>> {
    sc.subsystems
        .iter()
        .map(|s| {
            Ok(match &s.kets {
                Some(k) => SubsystemLabel::with_kets(&s.label, k.clone())?,
                None => SubsystemLabel::new(&s.label, s.dim)?,
            })
        })
        .collect()
}

pub(crate) fn initial_state(sc: &Scenario, overrides: &[InitialSpec]) -> Result<StateVector> {
    let mut factors = Vec::with_capacity(sc.subsystems.len());
    for label in labels(sc)? {
        let spec = overrides
            .iter()
            .find(|i| i.subsystem == label.name)
            .or_else(|| sc.initial.iter().find(|i| i.subsystem == label.name));
        let amps: Vec<C64> = match spec {
            Some(i) => {
                let raw: Vec<C64> = i.amplitudes.iter().map(|a| a.c64()).collect();
                let n = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                raw.into_iter().map(|a| a / n).collect()
            }
            None => {
                let mut v = vec![C64::new(0.0, 0.0); label.dim];
                v[0] = C64::new(1.0, 0.0);
                v
            }
        };
        factors.push((label, amps));
    }
    if factors.is_empty() {
        return Ok(StateVector::new(Space::new(vec![])?, vec![C64::new(1.0, 0.0)])?);
    }
    Ok(StateVector::product(factors)?)
}

/// Unitary whose first column is the normalized `v`.
fn preparation(label: SubsystemLabel, v: &[C64]) -> Result<UnitaryOp> {
    let n = v.len();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<C64> = v.iter().map(|a| a / norm).collect();
    let pivot = (0..n).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap_or(0);
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        m[(i, 0)] = v[i];
    }
    let mut col = 1;
    for j in (0..n).filter(|&j| j != pivot) {
        m[(j, col)] = C64::new(1.0, 0.0);
        col += 1;
    }
    let qr = m.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // Undo the phase QR puts on the first column.
    let phase = r[(0, 0)] / r[(0, 0)].norm();
    for i in 0..n {
        q[(i, 0)] *= phase;
    }
    Ok(UnitaryOp::new(vec![label], q)?)
}

fn branches_of(s: &StateVector, pointers: &[String]) -> Result<Vec<BranchSummary>> {
    if pointers.is_empty() {
        return Ok(vec![BranchSummary { label: ROOT_BRANCH.into(), records: IndexMap::new(), weight: s.norm_sqr() }]);
    }
    let ptrs: Vec<&str> = pointers.iter().map(String::as_str).collect();
    let bs = state_branches(s, &ptrs, decoherence_eps())?;
    Ok(bs
        .branches
        .into_iter()
        .map(|b| BranchSummary {
            label: b.label,
            records: pointers.iter().cloned().zip(b.records).collect(),
            weight: b.weight,
        })
        .collect())
}

/// The single ket of `target` on the branch with `records`.
fn definite_ket(s: &StateVector, records: &IndexMap<String, String>, target: &str, time: u32) -> Result<String> {
    let space = s.space();
    let t = space.require(target)?;
    let conds: Vec<(usize, usize)> = records
        .iter()
        .map(|(d, k)| {
            let p = space.require(d)?;
            let i = space.labels()[p].ket_index(k).expect("records name existing kets");
            Ok((p, i))
        })
        .collect::<Result<_>>()?;
    let mut found: Option<usize> = None;
    for (coords, _) in s.support(SUPPORT_TOL) {
        if conds.iter().all(|&(p, i)| coords[p] == i) {
            match found {
                None => found = Some(coords[t]),
                Some(k) if k != coords[t] => {
                    return Err(event_err(time, format!("`{target}` holds no definite record on branch")));
                }
                _ => {}
            }
        }
    }
    found
        .map(|k| space.labels()[t].ket(k).to_string())
        .ok_or_else(|| event_err(time, format!("`{target}` has no support on branch")))
}

struct Runner<'a> {
    sc: &'a Scenario,
    ws: WorldState,
}

impl<'a> Runner<'a> {
    fn new(sc: &'a Scenario, overrides: &[InitialSpec]) -> Result<Self> {
        let state = initial_state(sc, overrides)?;
        let branches = branches_of(&state, &[])?;
        let lineages = sc
            .observers
            .iter()
            .map(|o| Lineage {
                observer: o.id.clone(),
                copy: o.id.clone(),
                branch: ROOT_BRANCH.into(),
                records: IndexMap::new(),
                memory: Vec::new(),
                location: None,
            })
            .collect();
        let ws = WorldState { tick: 0, state, pointers: Vec::new(), branches, lineages, copies: Vec::new(), log: Vec::new() };
        Ok(Self { sc, ws })
    }

    fn weight(&self, branch: &str) -> f64 {
        self.ws.branch(branch).map_or(0.0, |b| b.weight)
    }

    /// Re-branch after a quantum event and carry lineages onto their children.
    fn rebranch(&mut self) -> Result<()> {
        let branches = branches_of(&self.ws.state, &self.ws.pointers)?;
        let mut next = Vec::with_capacity(self.ws.lineages.len());
        for l in &self.ws.lineages {
            for b in &branches {
                if l.records.iter().all(|(d, k)| b.records.get(d) == Some(k)) {
                    next.push(Lineage { branch: b.label.clone(), records: b.records.clone(), ..l.clone() });
                }
            }
        }
        self.ws.lineages = next;
        self.ws.branches = branches;
        Ok(())
    }

    /// Indices of the lineages of `observer` satisfying `when`.
    fn matching(&self, observer: &str, when: Option<&Predicate>, time: u32) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, l) in self.ws.lineages.iter().enumerate() {
            if l.observer != observer {
                continue;
            }
            if let Some(p) = when {
                if !p.eval(&l.cell(time))? {
                    continue;
                }
            }
            out.push(i);
        }
        Ok(out)
    }

    fn register(&mut self, idx: usize, time: u32, day: Option<String>, evidence: Vec<String>) {
        let l = &self.ws.lineages[idx];
        let weight = self.weight(&l.branch);
        self.ws.copies.push(CopyRecord {
            observer: l.observer.clone(),
            copy: l.copy.clone(),
            branch: l.branch.clone(),
            records: l.records.clone(),
            time,
            day,
            weight,
            evidence,
            location: l.location.clone(),
        });
    }

    fn apply(&mut self, e: &Event) -> Result<()> {
        let t = e.time();
        match e {
            Event::Prepare(p) => {
                let space = self.ws.state.space();
                let pos = space.require(&p.subsystem)?;
                if self.ws.state.support(SUPPORT_TOL).iter().any(|(c, _)| c[pos] != 0) {
                    return Err(event_err(t, format!("`{}` is not in its ready state", p.subsystem)));
                }
                let label = space.labels()[pos].clone();
                let amps: Vec<C64> = p.amplitudes.iter().map(|a| a.c64()).collect();
                let u = preparation(label, &amps)?;
                self.ws.state = self.ws.state.apply_unitary(&u)?;
                self.ws.log.push(format!("t{t} prepare {}", p.subsystem));
            }
            Event::Measure(m) => {
                let mut spec = Measurement::new(&m.system, &m.detector, &m.env).with_leakage(m.leakage);
                if let Some(o) = &m.outcomes {
                    spec = spec.with_outcomes(o.clone());
                }
                if let Some(cols) = &m.basis {
                    let n = cols.len();
                    spec = spec.in_basis(DMatrix::from_fn(n, n, |i, j| cols[j][i].c64()));
                }
                self.ws.state = measure(&self.ws.state, &spec).map_err(wrap(t))?;
                self.push_pointer(&m.detector);
                self.rebranch().map_err(|e| event_err(t, e.to_string()))?;
                self.ws.log.push(format!("t{t} measure {} into {} ({})", m.system, m.detector, m.env));
            }
            Event::ConditionalMeasure(m) => {
                let mut spec = Measurement::new(&m.system, &m.detector, &m.env);
                if let Some(o) = &m.outcomes {
                    spec = spec.with_outcomes(o.clone());
                }
                let cond: Vec<(String, String)> = m.condition.iter().map(|c| (c.detector.clone(), c.is.clone())).collect();
                self.ws.state = conditional_measure(&self.ws.state, &cond, &spec).map_err(wrap(t))?;
                self.push_pointer(&m.detector);
                self.rebranch().map_err(|e| event_err(t, e.to_string()))?;
                let c: Vec<String> = m.condition.iter().map(|c| format!("{}={}", c.detector, c.is)).collect();
                self.ws.log.push(format!("t{t} measure {} into {} if {}", m.system, m.detector, c.join(" and ")));
            }
            Event::Wire(w) => {
                let mut wiring = Wiring::new(w.sources.clone());
                for entry in &w.map {
                    wiring = wiring.entry(entry.records.clone(), entry.symbol.clone());
                }
                self.ws.state = apply_wiring(&self.ws.state, &wiring, &w.display).map_err(wrap(t))?;
                self.ws.log.push(format!("t{t} wire {} into {}", w.sources.join(","), w.display));
            }
            Event::Observe(o) => {
                for i in self.matching(&o.observer, None, t)? {
                    let l = &self.ws.lineages[i];
                    let ket = match l.records.get(&o.target) {
                        Some(k) => k.clone(),
                        None => definite_ket(&self.ws.state, &l.records, &o.target, t)?,
                    };
                    self.ws.lineages[i].memory.push(format!("{}={}", o.target, ket));
                }
                let subsystem = self.sc.observer(&o.observer).and_then(|s| s.subsystem.clone());
                if let Some(into) = subsystem {
                    self.write_record(&o.target, &into, t)?;
                }
                self.ws.log.push(format!("t{t} {} observes {}", o.observer, o.target));
            }
            Event::EraseMemory(er) => {
                for i in self.matching(&er.observer, er.when.as_ref(), t)? {
                    self.ws.lineages[i].memory.truncate(er.keep);
                }
                self.ws.log.push(format!("t{t} erase memory of {}", er.observer));
            }
            Event::Duplicate(d) => {
                if self.ws.lineages.iter().any(|l| l.observer == d.observer && l.copy == d.copy) {
                    return Err(event_err(t, format!("copy `{}` of `{}` already exists", d.copy, d.observer)));
                }
                // Without a filter only the original copies split.
                let mut sources = self.matching(&d.observer, d.when.as_ref(), t)?;
                if d.when.is_none() {
                    sources.retain(|&i| self.ws.lineages[i].copy == d.observer);
                }
                for (k, &i) in sources.iter().enumerate() {
                    let branch = &self.ws.lineages[i].branch;
                    if sources[..k].iter().any(|&j| self.ws.lineages[j].branch == *branch) {
                        return Err(event_err(t, format!("several copies of `{}` on `{branch}` would become `{}`", d.observer, d.copy)));
                    }
                }
                let born: Vec<Lineage> =
                    sources.into_iter().map(|i| Lineage { copy: d.copy.clone(), ..self.ws.lineages[i].clone() }).collect();
                self.ws.lineages.extend(born);
                self.ws.log.push(format!("t{t} duplicate {} as {}", d.observer, d.copy));
            }
            Event::WakeOn(w) => {
                for i in self.matching(&w.observer, Some(&w.when), t)? {
                    let evidence = self.ws.lineages[i].memory.clone();
                    self.register(i, t, w.day.clone(), evidence);
                    self.ws.lineages[i].memory.push("awake".into());
                }
                self.ws.log.push(format!("t{t} {} may wake{}", w.observer, w.day.as_ref().map(|d| format!(" ({d})")).unwrap_or_default()));
            }
            Event::Relocate(r) => {
                for l in self.ws.lineages.iter_mut() {
                    if l.observer == r.observer && r.copy.as_ref().is_none_or(|c| *c == l.copy) {
                        l.location = Some(r.to.clone());
                    }
                }
                self.ws.log.push(format!("t{t} relocate {} to {}", r.observer, r.to));
            }
        }
        Ok(())
    }

    fn push_pointer(&mut self, detector: &str) {
        if !self.ws.pointers.iter().any(|p| p == detector) {
            self.ws.pointers.push(detector.to_string());
        }
    }

    /// Copy `target`'s record into the observer's own subsystem, if it is ready.
    fn write_record(&mut self, target: &str, into: &str, t: u32) -> Result<()> {
        let space = self.ws.state.space();
        let pos = space.require(into)?;
        if self.ws.state.support(SUPPORT_TOL).iter().any(|(c, _)| c[pos] != 0) {
            return Ok(());
        }
        let (src, dst) = (space.label(target).expect("validated").clone(), space.labels()[pos].clone());
        let mut wiring = Wiring::new([target]);
        for k in &src.kets {
            if let Some(j) = dst.ket_index(k) {
                wiring = wiring.entry([k.clone()], dst.ket(j).to_string());
            }
        }
        self.ws.state = apply_wiring(&self.ws.state, &wiring, into).map_err(wrap(t))?;
        Ok(())
    }

    /// Copies that continuous observers contribute at tick `t`.
    fn tick_copies(&mut self, t: u32) {
        for i in 0..self.ws.lineages.len() {
            if self.sc.is_sleeper(&self.ws.lineages[i].observer) {
                continue;
            }
            let mut evidence = vec![format!("clock:{t}")];
            evidence.extend(self.ws.lineages[i].memory.iter().cloned());
            self.register(i, t, None, evidence);
        }
    }
}

/// Execute the timeline up to and including tick `until`.
pub fn run(sc: &Scenario, until: u32) -> Result<WorldState> {
    run_with_initial(sc, until, &[])
}

/// [`run`] with some initial amplitudes replaced.
pub fn run_with_initial(sc: &Scenario, until: u32, overrides: &[InitialSpec]) -> Result<WorldState> {
    let last = sc.last_tick();
    if until > last {
        return Err(ScenarioError::Unreachable { time: until, last });
    }
    let mut r = Runner::new(sc, overrides)?;
    let mut events = sc.events.iter().peekable();
    for t in 0..=until {
        r.ws.tick = t;
        while let Some(e) = events.next_if(|e| e.time() == t) {
            r.apply(e)?;
        }
        r.tick_copies(t);
    }
    Ok(r.ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::real;

    #[test]
    fn preparation_maps_ready_to_target() {
        let label = SubsystemLabel::new("a", 3).unwrap();
        let v = [C64::new(0.0, 0.6), real(0.0), real(-0.8)];
        let u = preparation(label.clone(), &v).unwrap();
        let s = StateVector::single(label, vec![real(1.0), real(0.0), real(0.0)]).unwrap();
        let out = s.apply_unitary(&u).unwrap();
        for (a, b) in out.amps().iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
