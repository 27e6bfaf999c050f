//! Measurement as record-keeping, and decomposition into branches.
//!
//! Conventions shared by everything that builds states:
//! * ket 0 of every detector and display is its ready state;
//! * a measurement writes the outcome into the detector and a fresh,
//!   previously unoccupied basis state of an environment factor;
//! * a detector ket named `X` is the "not measured" record used by
//!   conditional measurements.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{QStateError, StateVector, UnitaryOp, C64, DEFAULT_TOL};

/// Amplitudes below this magnitude are treated as numerical zeros when
/// allocating environment records.
const SUPPORT_TOL: f64 = 1e-14;

pub const IDLE_RECORD: &str = "X";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error(transparent)]
    State(#[from] QStateError),
    #[error("`{label}` is too small: needs dimension {need}, has {have}")]
    DimensionTooSmall { label: String, need: usize, have: usize },
    #[error("detector `{0}` has not recorded anything on every branch")]
    NoRecord(String),
    #[error("`{0}` is not in its ready state on every branch")]
    NotReady(String),
    #[error("`{label}` has no ket named `{ket}`")]
    UnknownKet { label: String, ket: String },
    #[error("wiring has no entry for source record ({0})")]
    IncompleteWiring(String),
    #[error("reduced state is not decohered: off-diagonal block of size {0:e}")]
    NotDecohered(f64),
    #[error("measurement basis is not orthonormal (deviation {0:e})")]
    InvalidBasis(f64),
    #[error("leakage must lie in [0, 1), got {0}")]
    InvalidLeakage(f64),
    #[error("subsystems `{0}` must be distinct")]
    Overlap(String),
}

pub type Result<T> = std::result::Result<T, BranchError>;

/// Decoherence threshold, overridable through `BRANCHLAB_EPS`.
pub fn decoherence_eps() -> f64 {
    std::env::var("BRANCHLAB_EPS")
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|e| e.is_finite() && *e > 0.0)
        .unwrap_or(DEFAULT_TOL)
}

/// How to measure `system` into `detector`, leaving a trace in `env`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub system: String,
    pub detector: String,
    pub env: String,
    /// Columns are the measurement basis; `None` means the computational basis.
    pub basis: Option<DMatrix<C64>>,
    /// Detector ket written for each basis vector; defaults to kets `1..=n`.
    /// Repeated names merge outcomes onto one record.
    pub outcomes: Option<Vec<String>>,
    /// Overlap ⟨E_i|E_j⟩ between the fresh records of different outcomes.
    pub leakage: f64,
}

impl Measurement {
    pub fn new(system: impl Into<String>, detector: impl Into<String>, env: impl Into<String>) -> Self {
        Self { system: system.into(), detector: detector.into(), env: env.into(), basis: None, outcomes: None, leakage: 0.0 }
    }

    pub fn in_basis(mut self, basis: DMatrix<C64>) -> Self {
        self.basis = Some(basis);
        self
    }

    pub fn with_outcomes<S: Into<String>>(mut self, outcomes: impl IntoIterator<Item = S>) -> Self {
        self.outcomes = Some(outcomes.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = leakage;
        self
    }
}

/// Entangle each eigencomponent of `system` with a distinct detector record
/// and a fresh environment record.
pub fn measure(s: &StateVector, m: &Measurement) -> Result<StateVector> {
    measure_where(s, m, &[])
}

/// Like [`measure`], but only on branches whose detectors show the given
/// records; every other branch gets the `X` record in `m.detector`.
pub fn conditional_measure(s: &StateVector, condition: &[(String, String)], m: &Measurement) -> Result<StateVector> {
    measure_where(s, m, condition)
}

fn ket_index(s: &StateVector, label: &str, ket: &str) -> Result<(usize, usize)> {
    let pos = s.space().require(label)?;
    let idx = s.space().labels()[pos]
        .ket_index(ket)
        .ok_or_else(|| BranchError::UnknownKet { label: label.to_string(), ket: ket.to_string() })?;
    Ok((pos, idx))
}

fn measure_where(s: &StateVector, m: &Measurement, condition: &[(String, String)]) -> Result<StateVector> {
    let space = s.space().clone();
    let sys = space.require(&m.system)?;
    let det = space.require(&m.detector)?;
    let env = space.require(&m.env)?;
    if sys == det || sys == env || det == env {
        return Err(BranchError::Overlap(format!("{}, {}, {}", m.system, m.detector, m.env)));
    }
    if !(0.0..1.0).contains(&m.leakage) {
        return Err(BranchError::InvalidLeakage(m.leakage));
    }
    let labels = space.labels();
    let n = labels[sys].dim;
    let det_label = &labels[det];

    let outcome_idx: Vec<usize> = match &m.outcomes {
        None => {
            if det_label.dim < n + 1 {
                return Err(BranchError::DimensionTooSmall { label: m.detector.clone(), need: n + 1, have: det_label.dim });
            }
            (1..=n).collect()
        }
        Some(names) => {
            if names.len() != n {
                return Err(BranchError::DimensionTooSmall { label: m.detector.clone(), need: n, have: names.len() });
            }
            let mut out = Vec::with_capacity(n);
            for name in names {
                let (_, i) = ket_index(s, &m.detector, name)?;
                if i == 0 {
                    return Err(BranchError::UnknownKet { label: m.detector.clone(), ket: name.clone() });
                }
                out.push(i);
            }
            out
        }
    };

    let cond: Vec<(usize, usize)> =
        condition.iter().map(|(l, k)| ket_index(s, l, k)).collect::<Result<_>>()?;
    let idle = if condition.is_empty() { None } else { Some(ket_index(s, &m.detector, IDLE_RECORD)?.1) };

    let sys_label = labels[sys].clone();
    let rotated = match &m.basis {
        None => s.clone(),
        Some(v) => {
            let u = UnitaryOp::new(vec![sys_label.clone()], v.clone())
                .map_err(|e| match e {
                    QStateError::NotUnitary(d) => BranchError::InvalidBasis(d),
                    other => other.into(),
                })?;
            s.apply_unitary(&u.adjoint())?
        }
    };

    let support: Vec<(Vec<usize>, C64)> = rotated.support(SUPPORT_TOL);
    let mut matched = Vec::with_capacity(support.len());
    for (coords, _) in &support {
        if coords[det] != 0 {
            return Err(BranchError::NotReady(m.detector.clone()));
        }
        let mut ok = true;
        for &(pos, want) in &cond {
            if coords[pos] == 0 {
                return Err(BranchError::NoRecord(labels[pos].name.clone()));
            }
            ok &= coords[pos] == want;
        }
        matched.push(ok);
    }

    // Fresh environment records, allocated in (old record, outcome) order.
    let mut next = support.iter().map(|(c, _)| c[env]).max().map_or(0, |m| m + 1);
    let pairs: BTreeSet<(usize, usize)> = support
        .iter()
        .zip(&matched)
        .filter(|(_, &ok)| ok)
        .map(|((c, _), _)| (c[env], c[sys]))
        .collect();
    let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
    let mut fresh: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(r, k) in &pairs {
        if m.leakage > 0.0 && !shared.contains_key(&r) {
            shared.insert(r, next);
            next += 1;
        }
        fresh.insert((r, k), next);
        next += 1;
    }
    let env_dim = labels[env].dim;
    if next > env_dim && !pairs.is_empty() {
        return Err(BranchError::DimensionTooSmall { label: m.env.clone(), need: next, have: env_dim });
    }

    let keep = (1.0 - m.leakage).sqrt();
    let leak = m.leakage.sqrt();
    let mut entries = Vec::with_capacity(support.len() * 2);
    for ((coords, a), ok) in support.into_iter().zip(matched) {
        let mut c = coords.clone();
        if !ok {
            c[det] = idle.expect("idle record exists when a condition is given");
            entries.push((c, a));
            continue;
        }
        let (r, k) = (coords[env], coords[sys]);
        c[det] = outcome_idx[k];
        c[env] = fresh[&(r, k)];
        if m.leakage > 0.0 {
            entries.push((c.clone(), a * keep));
            c[env] = shared[&r];
            entries.push((c, a * leak));
        } else {
            entries.push((c, a));
        }
    }
    let recorded = StateVector::from_sparse(space, entries)?;
    Ok(match &m.basis {
        None => recorded,
        Some(v) => recorded.apply_unitary(&UnitaryOp::new(vec![sys_label], v.clone())?)?,
    })
}

/// Display symbol as a function of the records held by `sources`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wiring {
    pub sources: Vec<String>,
    pub map: BTreeMap<Vec<String>, String>,
}

impl Wiring {
    pub fn new<S: Into<String>>(sources: impl IntoIterator<Item = S>) -> Self {
        Self { sources: sources.into_iter().map(Into::into).collect(), map: BTreeMap::new() }
    }

    /// Single-source wiring from `(record, symbol)` pairs.
    pub fn from_pairs<A: Into<String>, B: Into<String>>(source: impl Into<String>, pairs: impl IntoIterator<Item = (A, B)>) -> Self {
        let mut w = Self::new([source.into()]);
        for (a, b) in pairs {
            w.map.insert(vec![a.into()], b.into());
        }
        w
    }

    pub fn entry<S: Into<String>>(mut self, records: impl IntoIterator<Item = S>, symbol: impl Into<String>) -> Self {
        self.map.insert(records.into_iter().map(Into::into).collect(), symbol.into());
        self
    }
}

/// Write `w(records)` into `display` on every branch.
///
/// The map is a controlled swap of the display's ready ket with the target
/// symbol, so it is a permutation unitary on sources ⊗ display.
pub fn apply_wiring(s: &StateVector, w: &Wiring, display: &str) -> Result<StateVector> {
    let space = s.space();
    let disp_pos = space.require(display)?;
    if w.sources.iter().any(|src| src == display) {
        return Err(BranchError::Overlap(display.to_string()));
    }
    let src_pos: Vec<usize> = w.sources.iter().map(|n| space.require(n)).collect::<std::result::Result<_, _>>()?;
    let labels = space.labels();
    let disp = &labels[disp_pos];

    let mut table: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (records, symbol) in &w.map {
        if records.len() != src_pos.len() {
            return Err(BranchError::IncompleteWiring(records.join(",")));
        }
        let mut key = Vec::with_capacity(records.len());
        for (r, &p) in records.iter().zip(&src_pos) {
            let i = labels[p]
                .ket_index(r)
                .ok_or_else(|| BranchError::UnknownKet { label: labels[p].name.clone(), ket: r.clone() })?;
            key.push(i);
        }
        let sym = disp
            .ket_index(symbol)
            .ok_or_else(|| BranchError::UnknownKet { label: display.to_string(), ket: symbol.clone() })?;
        table.insert(key, sym);
    }

    for (coords, _) in s.support(SUPPORT_TOL) {
        if coords[disp_pos] != 0 {
            return Err(BranchError::NotReady(display.to_string()));
        }
        let key: Vec<usize> = src_pos.iter().map(|&p| coords[p]).collect();
        if !table.contains_key(&key) {
            let names: Vec<&str> = key.iter().zip(&src_pos).map(|(&i, &p)| labels[p].ket(i)).collect();
            return Err(BranchError::IncompleteWiring(names.join(",")));
        }
    }

    let mut targets: Vec<_> = src_pos.iter().map(|&p| labels[p].clone()).collect();
    targets.push(disp.clone());
    let src_dims: Vec<usize> = src_pos.iter().map(|&p| labels[p].dim).collect();
    let src_total: usize = src_dims.iter().product();
    let mut image = Vec::with_capacity(src_total * disp.dim);
    for joint in 0..src_total * disp.dim {
        let src_index = joint / disp.dim;
        let d = joint % disp.dim;
        let key = unflatten(src_index, &src_dims);
        let sym = table.get(&key).copied().unwrap_or(0);
        let d2 = if d == 0 { sym } else if d == sym { 0 } else { d };
        image.push(src_index * disp.dim + d2);
    }
    let u = UnitaryOp::permutation(targets, &image)?;
    Ok(s.apply_unitary(&u)?)
}

fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

/// One outcome-labeled block of a decohered reduced state.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: String,
    /// Pointer ket per pointer subsystem, in the order the pointers were given.
    pub records: Vec<String>,
    pub weight: f64,
    /// Diagonal block of the decomposed operator (unnormalized).
    pub block: DMatrix<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchSet {
    pub source: String,
    pub pointers: Vec<String>,
    pub branches: Vec<Branch>,
}

impl BranchSet {
    pub fn get(&self, label: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn weight(&self, label: &str) -> f64 {
        self.get(label).map_or(0.0, |b| b.weight)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.branches.iter().map(|b| b.label.as_str()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// Split `rho` into blocks that agree on the records of `pointers`.
///
/// Fails with [`BranchError::NotDecohered`] if any block coupling two
/// different records has Frobenius norm above `eps`. Branches lighter than
/// `eps` are dropped. Branch order follows the joint basis order.
pub fn branch_decompose(rho: &crate::qstate::DensityOperator, pointers: &[&str], eps: f64) -> Result<BranchSet> {
    let space = rho.space();
    let pos: Vec<usize> = pointers.iter().map(|p| space.require(p)).collect::<std::result::Result<_, _>>()?;
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for i in 0..space.dim() {
        let coords = space.split(i);
        let key: Vec<usize> = pos.iter().map(|&p| coords[p]).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let mat = rho.matrix();
    let mut worst = 0.0f64;
    for (a, (_, ia)) in groups.iter().enumerate() {
        for (_, ib) in groups.iter().skip(a + 1) {
            let mut fro = 0.0;
            for &i in ia {
                for &j in ib {
                    fro += mat[(i, j)].norm_sqr();
                }
            }
            worst = worst.max(fro.sqrt());
        }
    }
    if worst > eps {
        return Err(BranchError::NotDecohered(worst));
    }
    let labels = space.labels();
    let mut branches = Vec::new();
    for (key, members) in groups {
        let weight: f64 = members.iter().map(|&i| mat[(i, i)].re).sum();
        if weight < eps {
            continue;
        }
        let records: Vec<String> = key.iter().zip(&pos).map(|(&k, &p)| labels[p].ket(k).to_string()).collect();
        let block = DMatrix::from_fn(members.len(), members.len(), |r, c| mat[(members[r], members[c])]);
        branches.push(Branch { label: records.join(","), records, weight, block });
    }
    let source = space.names().collect::<Vec<_>>().join("");
    Ok(BranchSet { source, pointers: pointers.iter().map(|p| p.to_string()).collect(), branches })
}

/// Branches of a pure state over the records of `pointers`, tracing out
/// everything else.
pub fn state_branches(s: &StateVector, pointers: &[&str], eps: f64) -> Result<BranchSet> {
    let rho = s.reduced(pointers)?;
    // `reduced` keeps factors in space order; restore the caller's order for labels.
    branch_decompose(&rho, pointers, eps)
}

/// A set of basis states that share the same coordinates on `keys`.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub key: Vec<usize>,
    pub weight: f64,
    pub coords: Vec<Vec<usize>>,
}

/// Group the support of `s` by its coordinates on `keys`, in basis order.
///
/// With exactly orthogonal records, each group is one term of the
/// branch expansion of `s`.
pub fn components(s: &StateVector, keys: &[&str], tol: f64) -> Result<Vec<Component>> {
    let pos: Vec<usize> = keys.iter().map(|k| s.space().require(k)).collect::<std::result::Result<_, _>>()?;
    let mut out: Vec<Component> = Vec::new();
    for (coords, a) in s.support(tol) {
        let key: Vec<usize> = pos.iter().map(|&p| coords[p]).collect();
        match out.iter_mut().find(|c| c.key == key) {
            Some(c) => {
                c.weight += a.norm_sqr();
                c.coords.push(coords);
            }
            None => out.push(Component { key, weight: a.norm_sqr(), coords: vec![coords] }),
        }
    }
    Ok(out)
}
