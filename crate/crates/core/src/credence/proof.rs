//! Mechanical replay of the equiprobability arguments.
//!
//! A [`Proof`] holds named witness states ("worlds") and a list of premises.
//! Each premise is checked numerically and, if it holds, licenses equalities
//! between events of the form "in world W, subsystem L shows ket k":
//!
//! * equal reduced states of agent+L in two worlds make every L-event equally
//!   probable in both;
//! * two events with the same support in one world are the same event.
//!
//! The conclusion chases these equalities with a union-find. When a set of
//! atoms partitions a world and all atoms land in one class, each atom gets
//! probability `1/#atoms`, and the subject world inherits the sums.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{equal_amplitude_refine, rationalize, CredenceError, CredenceTable, Result, DEFAULT_MAX_DENOMINATOR};
use super::esp::compare_reduced;
use crate::branching::{apply_wiring, components, measure, Measurement, Wiring};
use crate::qstate::{real, tensor, Space, StateVector, SubsystemLabel, C64};

const PASS_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-14;

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Classes in order of their smallest member.
    pub(crate) fn classes(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: IndexMap<usize, Vec<usize>> = IndexMap::new();
        for x in 0..self.parent.len() {
            let r = self.find(x);
            by_root.entry(r).or_default().push(x);
        }
        by_root.into_values().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProofCase {
    HalfHalf,
    OneThirdTwoThirds,
    General { weights: Vec<f64>, phases: Vec<f64> },
}

impl ProofCase {
    pub fn id(&self) -> String {
        match self {
            ProofCase::HalfHalf => "half-half".into(),
            ProofCase::OneThirdTwoThirds => "one-third-two-thirds".into(),
            ProofCase::General { weights, .. } => format!("general-{}", weights.len()),
        }
    }
}

/// How the general case lays out its display screens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisplayMode {
    /// One witness pair per display, tied together through the component tag.
    Folded,
    /// A single witness pair carrying every display (exponential in size).
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Premise {
    ReducedEqual { step: String, description: String, left: String, right: String, keep: Vec<String> },
    SameBranches { step: String, description: String, world: String, a: (String, String), b: (String, String) },
}

impl Premise {
    fn reduced(step: &str, description: &str, left: &str, right: &str, keep: &[&str]) -> Self {
        Premise::ReducedEqual {
            step: step.into(),
            description: description.into(),
            left: left.into(),
            right: right.into(),
            keep: keep.iter().map(|k| k.to_string()).collect(),
        }
    }

    fn same(step: &str, description: &str, world: &str, a: (&str, &str), b: (&str, &str)) -> Self {
        Premise::SameBranches {
            step: step.into(),
            description: description.into(),
            world: world.into(),
            a: (a.0.into(), a.1.into()),
            b: (b.0.into(), b.1.into()),
        }
    }
}

/// One checked premise or conclusion condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PremiseCheck {
    pub step: String,
    pub description: String,
    pub left: String,
    pub right: String,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofReport {
    pub case: String,
    pub premises: Vec<PremiseCheck>,
    /// Present only when every premise and conclusion condition passes.
    pub conclusion: Option<CredenceTable>,
}

impl ProofReport {
    pub fn first_failure(&self) -> Option<&PremiseCheck> {
        self.premises.iter().find(|p| !p.pass)
    }

    pub fn passed(&self) -> bool {
        self.conclusion.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Proof {
    pub case: String,
    pub worlds: IndexMap<String, StateVector>,
    pub premises: Vec<Premise>,
    /// World whose partition into atoms is shown equiprobable, and the atoms.
    pub atoms: (String, Vec<(String, String)>),
    /// World and detector the final table is about.
    pub subject: (String, String),
}

type Event = (String, String, String);

impl Proof {
    pub fn build(case: &ProofCase) -> Result<Self> {
        Self::build_with(case, DisplayMode::Folded)
    }

    pub fn build_with(case: &ProofCase, mode: DisplayMode) -> Result<Self> {
        match case {
            ProofCase::HalfHalf => half_half(),
            ProofCase::OneThirdTwoThirds => one_third_two_thirds(),
            ProofCase::General { weights, phases } => general(weights, phases, mode),
        }
    }

    fn world(&self, name: &str) -> Result<&StateVector> {
        self.worlds.get(name).ok_or_else(|| CredenceError::InvalidInput(format!("unknown world `{name}`")))
    }

    /// Weight of the basis states where the two predicates disagree.
    fn symmetric_difference(s: &StateVector, a: &(String, String), b: &(String, String)) -> Result<f64> {
        let (pa, ka) = event_coords(s, a)?;
        let (pb, kb) = event_coords(s, b)?;
        Ok(s.support(SUPPORT_TOL)
            .iter()
            .filter(|(c, _)| (c[pa] == ka) != (c[pb] == kb))
            .map(|(_, amp)| amp.norm_sqr())
            .fold(0.0, |acc, w| acc + w))
    }

    /// Check every premise, chase labels, and derive the conclusion.
    pub fn check(&self) -> Result<ProofReport> {
        let mut events: IndexMap<Event, usize> = IndexMap::new();
        let mut links: Vec<(Event, Event)> = Vec::new();
        let mut checks = Vec::new();

        for p in &self.premises {
            match p {
                Premise::ReducedEqual { step, description, left, right, keep } => {
                    let keep_refs: Vec<&str> = keep.iter().map(String::as_str).collect();
                    let deviation = compare_reduced(self.world(left)?, self.world(right)?, &keep_refs)?;
                    let pass = deviation < PASS_TOL;
                    checks.push(PremiseCheck {
                        step: step.clone(),
                        description: description.clone(),
                        left: format!("ρ_{}({left})", keep.join("")),
                        right: format!("ρ_{}({right})", keep.join("")),
                        deviation,
                        pass,
                    });
                    if pass {
                        let lw = self.world(left)?;
                        for l in keep {
                            let label = lw.space().label(l).expect("reduced state resolved it");
                            for k in &label.kets {
                                links.push(((left.clone(), l.clone(), k.clone()), (right.clone(), l.clone(), k.clone())));
                            }
                        }
                    }
                }
                Premise::SameBranches { step, description, world, a, b } => {
                    let deviation = Self::symmetric_difference(self.world(world)?, a, b)?;
                    let pass = deviation < PASS_TOL;
                    checks.push(PremiseCheck {
                        step: step.clone(),
                        description: description.clone(),
                        left: format!("{}={} in {world}", a.0, a.1),
                        right: format!("{}={} in {world}", b.0, b.1),
                        deviation,
                        pass,
                    });
                    if pass {
                        links.push(((world.clone(), a.0.clone(), a.1.clone()), (world.clone(), b.0.clone(), b.1.clone())));
                    }
                }
            }
        }

        let intern = |e: &Event, events: &mut IndexMap<Event, usize>| -> usize {
            let n = events.len();
            *events.entry(e.clone()).or_insert(n)
        };
        let mut pairs = Vec::with_capacity(links.len());
        for (a, b) in &links {
            pairs.push((intern(a, &mut events), intern(b, &mut events)));
        }
        let (atom_world, atoms) = &self.atoms;
        let atom_ids: Vec<usize> =
            atoms.iter().map(|(l, k)| intern(&(atom_world.clone(), l.clone(), k.clone()), &mut events)).collect();
        let (subject_world, detector) = &self.subject;
        let subject_state = self.world(subject_world)?;
        let det_label = subject_state.space().require(detector).map(|p| subject_state.space().labels()[p].clone())?;
        let subject_ids: Vec<usize> = det_label
            .kets
            .iter()
            .map(|k| intern(&(subject_world.clone(), detector.clone(), k.clone()), &mut events))
            .collect();
        let bridge_ids: Vec<usize> = det_label
            .kets
            .iter()
            .map(|k| intern(&(atom_world.clone(), detector.clone(), k.clone()), &mut events))
            .collect();
        let mut uf = UnionFind::new(events.len());
        for (a, b) in pairs {
            uf.union(a, b);
        }

        let all_premises = checks.iter().all(|c| c.pass);
        let w = self.world(atom_world)?;
        let support = w.support(SUPPORT_TOL);
        let atom_coords: Vec<(usize, usize)> = atoms.iter().map(|a| event_coords(w, a)).collect::<Result<_>>()?;

        // Atoms must cover the world exactly once.
        let overlap: f64 = support
            .iter()
            .filter(|(c, _)| atom_coords.iter().filter(|(p, k)| c[*p] == *k).count() != 1)
            .map(|(_, a)| a.norm_sqr())
            .fold(0.0, |acc, w| acc + w);
        checks.push(PremiseCheck {
            step: "conclusion".into(),
            description: "atoms partition the world".into(),
            left: format!("{} atoms", atoms.len()),
            right: atom_world.clone(),
            deviation: overlap,
            pass: overlap < PASS_TOL,
        });

        let roots: Vec<usize> = atom_ids.iter().map(|&a| uf.find(a)).collect();
        let classes = {
            let mut r = roots.clone();
            r.sort_unstable();
            r.dedup();
            r.len()
        };
        checks.push(PremiseCheck {
            step: "conclusion".into(),
            description: "all atoms are linked as equiprobable".into(),
            left: format!("{} atoms", atoms.len()),
            right: format!("{classes} class(es)"),
            deviation: (classes as f64) - 1.0,
            pass: classes == 1,
        });

        // Each atom must sit inside one detector record.
        let det_pos = w.space().require(detector)?;
        let mut per_record = vec![0usize; det_label.dim];
        let mut spread = 0.0;
        for &(p, k) in &atom_coords {
            let mut records: Vec<usize> = support.iter().filter(|(c, _)| c[p] == k).map(|(c, _)| c[det_pos]).collect();
            records.sort_unstable();
            records.dedup();
            match records.as_slice() {
                [d] => per_record[*d] += 1,
                _ => spread += 1.0,
            }
        }
        checks.push(PremiseCheck {
            step: "conclusion".into(),
            description: format!("each atom shows a single `{detector}` record"),
            left: atom_world.clone(),
            right: detector.clone(),
            deviation: spread,
            pass: spread == 0.0,
        });

        // The subject inherits the atom world's detector probabilities.
        let subject_weights: Vec<f64> = (0..det_label.dim)
            .map(|d| subject_state.support(SUPPORT_TOL).iter().filter(|(c, _)| c[subject_state.space().require(detector).unwrap()] == d).map(|(_, a)| a.norm_sqr()).sum())
            .collect();
        let mut unlinked = 0.0;
        for d in 0..det_label.dim {
            let relevant = per_record[d] > 0 || subject_weights[d] > PASS_TOL;
            if relevant && uf.find(subject_ids[d]) != uf.find(bridge_ids[d]) {
                unlinked += 1.0;
            }
        }
        checks.push(PremiseCheck {
            step: "conclusion".into(),
            description: format!("`{detector}` events of {subject_world} are linked to {atom_world}"),
            left: subject_world.clone(),
            right: atom_world.clone(),
            deviation: unlinked,
            pass: unlinked == 0.0,
        });

        let conclusion = if all_premises && checks.iter().all(|c| c.pass) {
            let n = atoms.len() as f64;
            let entries = (0..det_label.dim)
                .filter(|&d| per_record[d] > 0)
                .map(|d| (det_label.ket(d).to_string(), per_record[d] as f64 / n))
                .collect();
            Some(CredenceTable { entries })
        } else {
            None
        };
        Ok(ProofReport { case: self.case.clone(), premises: checks, conclusion })
    }
}

fn event_coords(s: &StateVector, e: &(String, String)) -> Result<(usize, usize)> {
    let p = s.space().require(&e.0)?;
    let k = s.space().labels()[p]
        .ket_index(&e.1)
        .ok_or_else(|| CredenceError::InvalidInput(format!("`{}` has no ket `{}`", e.0, e.1)))?;
    Ok((p, k))
}

/// Build the proof for `case` and require every premise to hold.
pub fn replay_proof(case: &ProofCase) -> Result<ProofReport> {
    let report = Proof::build(case)?.check()?;
    match report.first_failure() {
        Some(f) => Err(CredenceError::PremiseFailed { step: f.step.clone(), deviation: f.deviation }),
        None => Ok(report),
    }
}

fn label(name: &str, kets: &[&str]) -> SubsystemLabel {
    SubsystemLabel::with_kets(name, kets.iter().copied()).expect("static label")
}

fn ready(l: &SubsystemLabel) -> (SubsystemLabel, Vec<C64>) {
    let mut v = vec![real(0.0); l.dim];
    v[0] = real(1.0);
    (l.clone(), v)
}

/// Alice (who never changes), the listed displays, and `a` measured into D1.
fn measured_particle(up_sq: f64, displays: &[SubsystemLabel]) -> Result<StateVector> {
    let mut factors = vec![ready(&label("A", &["R"])), ready(&label("D1", &["R", "↑", "↓"]))];
    factors.extend(displays.iter().map(ready));
    factors.push((label("a", &["↑", "↓"]), vec![real(up_sq.sqrt()), real((1.0 - up_sq).sqrt())]));
    factors.push(ready(&SubsystemLabel::new("E", 3)?));
    let s = StateVector::product(factors)?;
    Ok(measure(&s, &Measurement::new("a", "D1", "E"))?)
}

fn half_half() -> Result<Proof> {
    let d2 = label("D2", &["R", "♥", "♦"]);
    let psi = measured_particle(0.5, &[])?;
    let base = measured_particle(0.5, std::slice::from_ref(&d2))?;
    let psi1 = apply_wiring(&base, &Wiring::from_pairs("D1", [("↑", "♥"), ("↓", "♦")]), "D2")?;
    let psi2 = apply_wiring(&base, &Wiring::from_pairs("D1", [("↑", "♦"), ("↓", "♥")]), "D2")?;
    let worlds = IndexMap::from([("Ψ".to_string(), psi), ("Ψ₁".to_string(), psi1), ("Ψ₂".to_string(), psi2)]);
    let premises = vec![
        Premise::reduced("1", "Alice+D1 reduced states agree", "Ψ₁", "Ψ₂", &["A", "D1"]),
        Premise::reduced("2", "Alice+D2 reduced states agree", "Ψ₁", "Ψ₂", &["A", "D2"]),
        Premise::same("3", "♥-branches are the ↑-branches", "Ψ₁", ("D2", "♥"), ("D1", "↑")),
        Premise::same("3", "♥-branches are the ↓-branches", "Ψ₂", ("D2", "♥"), ("D1", "↓")),
        Premise::reduced("4", "any state with the same Alice+D1 reduced state", "Ψ₁", "Ψ", &["A", "D1"]),
    ];
    Ok(Proof {
        case: ProofCase::HalfHalf.id(),
        worlds,
        premises,
        atoms: ("Ψ₁".into(), vec![("D1".into(), "↑".into()), ("D1".into(), "↓".into())]),
        subject: ("Ψ".into(), "D1".into()),
    })
}

fn one_third_two_thirds() -> Result<Proof> {
    let d2 = label("D2", &["R", "♥", "♦"]);
    let d3 = label("D3", &["R", "♣", "♠"]);
    let psi = measured_particle(2.0 / 3.0, &[])?;
    let base = measured_particle(2.0 / 3.0, &[d2, d3])?;
    let rw = super::RationalWeights::exact(vec![2, 1])?;
    let refined = equal_amplitude_refine(&base, &rw, "E")?;
    let mut comps = components(&refined, &["E", "E'"], SUPPORT_TOL)?;
    comps.sort_by(|a, b| a.key.cmp(&b.key));
    let keys: Vec<Vec<String>> = comps
        .iter()
        .map(|c| {
            let sp = refined.space();
            let e = sp.label("E").unwrap();
            let e2 = sp.label("E'").unwrap();
            vec![e.ket(c.key[0]).to_string(), e2.ket(c.key[1]).to_string()]
        })
        .collect();
    let wire = |s: &StateVector, display: &str, symbols: [&str; 3]| -> Result<StateVector> {
        let mut w = Wiring::new(["E", "E'"]);
        for (k, sym) in keys.iter().zip(symbols) {
            w = w.entry(k.clone(), sym);
        }
        Ok(apply_wiring(s, &w, display)?)
    };
    // Components in order: two ↑ pieces, then the ↓ piece.
    let alpha = wire(&wire(&refined, "D2", ["♦", "♥", "♥"])?, "D3", ["♣", "♠", "♣"])?;
    let beta = wire(&wire(&refined, "D2", ["♥", "♥", "♦"])?, "D3", ["♣", "♣", "♠"])?;
    let worlds = IndexMap::from([("Ψ".to_string(), psi), ("Ψ_α".to_string(), alpha), ("Ψ_β".to_string(), beta)]);
    let premises = vec![
        Premise::reduced("1", "Alice+D1 reduced states agree", "Ψ_α", "Ψ_β", &["A", "D1"]),
        Premise::reduced("2", "Alice+D2 reduced states agree", "Ψ_α", "Ψ_β", &["A", "D2"]),
        Premise::same("2", "♦-branches are the ↓-branches", "Ψ_β", ("D2", "♦"), ("D1", "↓")),
        Premise::reduced("3", "Alice+D3 reduced states agree", "Ψ_α", "Ψ_β", &["A", "D3"]),
        Premise::same("3", "♠-branches are the ↓-branches", "Ψ_β", ("D3", "♠"), ("D1", "↓")),
        Premise::reduced("4", "refinement keeps the Alice+D1 reduced state", "Ψ_α", "Ψ", &["A", "D1"]),
    ];
    Ok(Proof {
        case: ProofCase::OneThirdTwoThirds.id(),
        worlds,
        premises,
        atoms: (
            "Ψ_α".into(),
            vec![("D2".into(), "♦".into()), ("D3".into(), "♠".into()), ("D1".into(), "↓".into())],
        ),
        subject: ("Ψ".into(), "D1".into()),
    })
}

fn general(weights: &[f64], phases: &[f64], mode: DisplayMode) -> Result<Proof> {
    let n = weights.len();
    if n == 0 {
        return Err(CredenceError::InvalidInput("no weights".into()));
    }
    if !phases.is_empty() && phases.len() != n {
        return Err(CredenceError::InvalidInput(format!("{} phases for {n} weights", phases.len())));
    }
    let rw = rationalize(weights, DEFAULT_MAX_DENOMINATOR)?;
    let m = rw.t_sq as usize;

    let d_kets: Vec<String> = std::iter::once("R".to_string()).chain((1..=n).map(|k| format!("d{k}"))).collect();
    let a = label("A", &["R"]);
    let d = SubsystemLabel::with_kets("D", d_kets.clone())?;
    let e = SubsystemLabel::with_kets("E", (1..=n).map(|k| format!("E{k}")))?;
    let space = Space::new(vec![a.clone(), d.clone(), e])?;
    let theta = |k: usize| phases.get(k).copied().unwrap_or(0.0);
    let psi0 = StateVector::from_sparse(
        space,
        (0..n).map(|k| (vec![0, k + 1, k], C64::from_polar(weights[k].sqrt(), theta(k)))),
    )?;
    let refined = equal_amplitude_refine(&psi0, &rw, "E")?;

    // Relabel the refined environment records as a single tag factor T.
    let mut comps = components(&refined, &["E", "E'"], SUPPORT_TOL)?;
    comps.sort_by(|x, y| x.key.cmp(&y.key));
    if comps.len() != m {
        return Err(CredenceError::WeightMismatch { expected: vec![m as f64], got: vec![comps.len() as f64] });
    }
    let t_kets: Vec<String> = (1..=m).map(|j| j.to_string()).collect();
    let t = SubsystemLabel::with_kets("T", t_kets.clone())?;
    let sp = refined.space();
    let (d_pos, anc_pos) = (sp.require("D")?, sp.require("E'")?);
    let anc = sp.labels()[anc_pos].clone();
    let amps: Vec<C64> = comps.iter().map(|c| refined.amp(&c.coords[0])).collect();
    // E_k ⊗ E'_j → T_(k,j) ⊗ E'_j: an injective relabeling of environment
    // records. E' stays so that pieces of one outcome remain decohered.
    let compact = StateVector::from_sparse(
        Space::new(vec![a.clone(), d, t.clone(), anc])?,
        comps.iter().enumerate().map(|(j, c)| (vec![0, c.coords[0][d_pos], j, c.coords[0][anc_pos]], amps[j])),
    )?;
    // Display witnesses need only Alice, the tag, and a redundant record of it.
    let record = SubsystemLabel::new("F", m)?;
    let tagged = StateVector::from_sparse(
        Space::new(vec![a, t, record])?,
        amps.iter().enumerate().map(|(j, &amp)| (vec![0, j, j], amp)),
    )?;

    let mut worlds = IndexMap::from([
        ("Ψ".to_string(), psi0),
        ("Ψ_eq".to_string(), refined),
        ("Ψ_tag".to_string(), compact.clone()),
    ]);
    let mut premises = vec![
        Premise::reduced("refine", "equal-amplitude refinement keeps Alice+D", "Ψ_eq", "Ψ", &["A", "D"]),
        Premise::reduced("relabel", "relabeling environment records keeps Alice+D", "Ψ_tag", "Ψ_eq", &["A", "D"]),
    ];
    let last = t_kets[m - 1].clone();
    let screen = |k: usize| SubsystemLabel::with_kets(format!("S{k}"), ["R", "S", "S'"]).expect("static");
    let show = |s: &StateVector, k: usize, primed_on: &str| -> Result<StateVector> {
        let mut w = Wiring::new(["T"]);
        for j in &t_kets {
            w = w.entry([j.clone()], if j == primed_on { "S'" } else { "S" });
        }
        Ok(apply_wiring(s, &w, &format!("S{k}"))?)
    };

    let atoms_world = match mode {
        DisplayMode::Folded => {
            for k in 1..=m {
                let (sl, sv) = ready(&screen(k));
                let with_screen = tensor(&tagged, &StateVector::single(sl, sv)?)?;
                let alpha = show(&with_screen, k, &t_kets[k - 1])?;
                let beta = show(&with_screen, k, &last)?;
                let (an, bn, sn) = (format!("Ψ_α{k}"), format!("Ψ_β{k}"), format!("S{k}"));
                premises.push(Premise::reduced(&format!("display {k}"), "Alice+display reduced states agree", &an, &bn, &["A", &sn]));
                premises.push(Premise::same(&format!("display {k}"), "primed display marks component k", &an, (&sn, "S'"), ("T", &t_kets[k - 1])));
                premises.push(Premise::same(&format!("display {k}"), "primed display marks the last component", &bn, (&sn, "S'"), ("T", &last)));
                premises.push(Premise::reduced(&format!("display {k}"), "adding a display keeps Alice+tag", &an, "Ψ_tag", &["A", "T"]));
                premises.push(Premise::reduced(&format!("display {k}"), "adding a display keeps Alice+tag", &bn, "Ψ_tag", &["A", "T"]));
                worlds.insert(an, alpha);
                worlds.insert(bn, beta);
            }
            "Ψ_tag".to_string()
        }
        DisplayMode::Full => {
            let mut alpha = compact.clone();
            let mut beta = compact.clone();
            for k in 1..=m {
                let (sl, sv) = ready(&screen(k));
                let fresh = StateVector::single(sl, sv)?;
                alpha = show(&tensor(&alpha, &fresh)?, k, &t_kets[k - 1])?;
                beta = show(&tensor(&beta, &fresh)?, k, &last)?;
                let sn = format!("S{k}");
                premises.push(Premise::reduced(&format!("display {k}"), "Alice+display reduced states agree", "Ψ_α", "Ψ_β", &["A", &sn]));
                premises.push(Premise::same(&format!("display {k}"), "primed display marks component k", "Ψ_α", (&sn, "S'"), ("T", &t_kets[k - 1])));
                premises.push(Premise::same(&format!("display {k}"), "primed display marks the last component", "Ψ_β", (&sn, "S'"), ("T", &last)));
            }
            premises.push(Premise::reduced("transfer", "displays keep Alice+D", "Ψ_α", "Ψ_tag", &["A", "D"]));
            worlds.insert("Ψ_α".into(), alpha);
            worlds.insert("Ψ_β".into(), beta);
            "Ψ_α".to_string()
        }
    };
    Ok(Proof {
        case: ProofCase::General { weights: weights.to_vec(), phases: phases.to_vec() }.id(),
        worlds,
        premises,
        atoms: (atoms_world, t_kets.iter().map(|j| ("T".to_string(), j.clone())).collect()),
        subject: ("Ψ".into(), "D".into()),
    })
}
