//! Probability rules over branches and observer copies.
//!
//! * [`born_credences`]: probabilities read off the agent+detector reduced state.
//! * [`indifference_credences`]: uniform over copies, amplitudes ignored.
//! * [`strong_esp`]: copies weighted by the squared amplitude of their branch.

mod esp;
mod proof;
mod rational;
mod refine;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branching::{branch_decompose, BranchError, BranchSet};
use crate::qstate::{DensityOperator, QStateError};

pub use esp::{compare_reduced, esp_invariance_check, swap_check, swap_closure, EspReport, SwapReport};
pub use proof::{replay_proof, DisplayMode, Premise, PremiseCheck, Proof, ProofCase, ProofReport};
pub use rational::{rationalize, RationalWeights, DEFAULT_MAX_DENOMINATOR};
pub use refine::{equal_amplitude_refine, refine_and_count, RefineOutcome};

/// Largest copy population the finite rules will accept.
pub const MAX_COPIES: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CredenceError {
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error("no observer copies to distribute credence over")]
    NoCopies,
    #[error("every weight is zero")]
    NoSupport,
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("copy `{0}` appears more than once")]
    DuplicateCopy(String),
    #[error("{0} copies exceeds the finite-population limit")]
    TooManyCopies(usize),
    #[error("no denominator up to the limit approximates the weights (best error {0:e})")]
    ApproximationFailed(f64),
    #[error("branch weights {got:?} do not match the rational weights {expected:?}")]
    WeightMismatch { expected: Vec<f64>, got: Vec<f64> },
    #[error("unitary acts on agent or detector subsystem `{0}`")]
    NotEnvironmentOnly(String),
    #[error("branches cannot be swapped: {0}")]
    NotSwappable(String),
    #[error("premise `{step}` failed with deviation {deviation:e}")]
    PremiseFailed { step: String, deviation: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, CredenceError>;

/// Probabilities over hypothesis labels, in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CredenceTable {
    pub entries: IndexMap<String, f64>,
}

impl CredenceTable {
    /// Normalize non-negative weights into a table.
    pub fn from_weights<S: Into<String>>(weights: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut entries: IndexMap<String, f64> = IndexMap::new();
        for (k, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(CredenceError::InvalidWeight(w));
            }
            *entries.entry(k.into()).or_insert(0.0) += w;
        }
        let total: f64 = entries.values().sum();
        if total <= 0.0 {
            return Err(CredenceError::NoSupport);
        }
        for v in entries.values_mut() {
            *v /= total;
        }
        Ok(Self { entries })
    }

    pub fn get(&self, label: &str) -> f64 {
        self.entries.get(label).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Total probability of the labels satisfying `pred`.
    pub fn probability(&self, pred: impl Fn(&str) -> bool) -> f64 {
        self.iter().filter(|(k, _)| pred(k)).map(|(_, v)| v).sum()
    }

    /// Largest difference over the union of both label sets.
    pub fn max_abs_diff(&self, other: &CredenceTable) -> f64 {
        let mut worst = 0.0f64;
        for (k, v) in self.iter() {
            worst = worst.max((v - other.get(k)).abs());
        }
        for (k, v) in other.iter() {
            if !self.entries.contains_key(k) {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.entries.values().all(|p| (-tol..=1.0 + tol).contains(p)) && (self.total() - 1.0).abs() <= tol
    }

    /// Merge labels with `key`, summing their probabilities.
    pub fn coarsen(&self, key: impl Fn(&str) -> String) -> Self {
        let mut entries: IndexMap<String, f64> = IndexMap::new();
        for (k, v) in self.iter() {
            *entries.entry(key(k)).or_insert(0.0) += v;
        }
        Self { entries }
    }
}

/// Born-rule credences: one entry per decohered branch, weight as probability.
pub fn born_credences(rho: &DensityOperator, pointers: &[&str], eps: f64) -> Result<CredenceTable> {
    let bs = branch_decompose(rho, pointers, eps)?;
    born_from_branches(&bs)
}

pub fn born_from_branches(bs: &BranchSet) -> Result<CredenceTable> {
    CredenceTable::from_weights(bs.branches.iter().map(|b| (b.label.clone(), b.weight)))
}

/// Branch-counting credences: each copy counts once, whatever its amplitude.
pub fn indifference_credences(bs: &BranchSet, copies_per_branch: &IndexMap<String, usize>) -> Result<CredenceTable> {
    let total: usize = bs.branches.iter().map(|b| copies_per_branch.get(&b.label).copied().unwrap_or(0)).sum();
    if total == 0 {
        return Err(CredenceError::NoCopies);
    }
    if total > MAX_COPIES {
        return Err(CredenceError::TooManyCopies(total));
    }
    let entries = bs
        .branches
        .iter()
        .map(|b| (b.label.clone(), copies_per_branch.get(&b.label).copied().unwrap_or(0) as f64 / total as f64))
        .collect();
    Ok(CredenceTable { entries })
}

/// A self-locating hypothesis: "I am copy `id`, on `branch`, at `time`".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverCopy {
    pub id: String,
    pub branch: String,
    pub time: u32,
    pub weight: f64,
}

impl ObserverCopy {
    pub fn new(id: impl Into<String>, branch: impl Into<String>, time: u32, weight: f64) -> Self {
        Self { id: id.into(), branch: branch.into(), time, weight }
    }
}

fn check_copies(copies: &[ObserverCopy]) -> Result<()> {
    if copies.is_empty() {
        return Err(CredenceError::NoCopies);
    }
    if copies.len() > MAX_COPIES {
        return Err(CredenceError::TooManyCopies(copies.len()));
    }
    for (i, c) in copies.iter().enumerate() {
        if !c.weight.is_finite() || c.weight < 0.0 {
            return Err(CredenceError::InvalidWeight(c.weight));
        }
        if copies[..i].iter().any(|d| d.id == c.id) {
            return Err(CredenceError::DuplicateCopy(c.id.clone()));
        }
    }
    Ok(())
}

/// `P(copy i) = w_i / Σ_j w_j`, keyed by copy id.
pub fn strong_esp(copies: &[ObserverCopy]) -> Result<CredenceTable> {
    check_copies(copies)?;
    CredenceTable::from_weights(copies.iter().map(|c| (c.id.clone(), c.weight)))
}

/// Uniform credence over copies, keyed by copy id.
pub fn uniform_over_copies(copies: &[ObserverCopy]) -> Result<CredenceTable> {
    check_copies(copies)?;
    CredenceTable::from_weights(copies.iter().map(|c| (c.id.clone(), 1.0)))
}

/// An observer whose own spin is `γ|↑⟩ + δ|↓⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageObserver {
    pub copy: ObserverCopy,
    pub up_amp_sq: f64,
    pub down_amp_sq: f64,
}

impl PageObserver {
    pub fn new(copy: ObserverCopy, up_amp_sq: f64) -> Self {
        Self { copy, up_amp_sq, down_amp_sq: 1.0 - up_amp_sq }
    }
}

/// `P(↑) = Σ_i P(observer i) |γ_i|²`.
pub fn page_aggregate(observers: &[PageObserver]) -> Result<f64> {
    for o in observers {
        if !(0.0..=1.0).contains(&o.up_amp_sq) || (o.up_amp_sq + o.down_amp_sq - 1.0).abs() > 1e-12 {
            return Err(CredenceError::InvalidInput(format!("spin weights of `{}` do not sum to 1", o.copy.id)));
        }
    }
    let copies: Vec<ObserverCopy> = observers.iter().map(|o| o.copy.clone()).collect();
    let table = strong_esp(&copies)?;
    Ok(observers.iter().map(|o| table.get(&o.copy.id) * o.up_amp_sq).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{state_branches, Branch};
    use crate::qstate::{real, StateVector, SubsystemLabel};
    use nalgebra::DMatrix;

    fn bs(weights: &[(&str, f64)]) -> BranchSet {
        BranchSet {
            source: "test".into(),
            pointers: vec!["D".into()],
            branches: weights
                .iter()
                .map(|(l, w)| Branch { label: l.to_string(), records: vec![l.to_string()], weight: *w, block: DMatrix::zeros(0, 0) })
                .collect(),
        }
    }

    #[test]
    fn born_reads_two_thirds() {
        let s = StateVector::product(vec![
            (SubsystemLabel::with_kets("A", ["R"]).unwrap(), vec![real(1.0)]),
            (SubsystemLabel::with_kets("D", ["↑", "↓"]).unwrap(), vec![real((2.0f64 / 3.0).sqrt()), real((1.0f64 / 3.0).sqrt())]),
        ])
        .unwrap();
        // Product state is not decohered when D's coherence is kept.
        assert!(born_credences(&s.reduced(&["A", "D"]).unwrap(), &["D"], 1e-10).is_err());
        let s2 = StateVector::product(vec![(SubsystemLabel::with_kets("D", ["↑"]).unwrap(), vec![real(1.0)])]).unwrap();
        let t = born_from_branches(&state_branches(&s2, &["D"], 1e-10).unwrap()).unwrap();
        assert_eq!(t.get("↑"), 1.0);
    }

    #[test]
    fn indifference_counts_branches() {
        let b = bs(&[("↑,↑", 0.25), ("↑,↓", 0.25), ("↓,X", 0.5)]);
        let copies: IndexMap<String, usize> = b.branches.iter().map(|x| (x.label.clone(), 1)).collect();
        let t = indifference_credences(&b, &copies).unwrap();
        assert!((t.probability(|l| l.starts_with('↓')) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(indifference_credences(&b, &IndexMap::new()).unwrap_err(), CredenceError::NoCopies);
    }

    #[test]
    fn strong_esp_examples() {
        let t = strong_esp(&[
            ObserverCopy::new("M↑", "↑", 1, 0.5),
            ObserverCopy::new("T↑", "↑", 2, 0.5),
            ObserverCopy::new("M↓", "↓", 1, 0.5),
        ])
        .unwrap();
        for (_, p) in t.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(strong_esp(&[ObserverCopy::new("a", "b", 0, 0.0)]).unwrap_err(), CredenceError::NoSupport);
        assert!(matches!(
            strong_esp(&[ObserverCopy::new("a", "b", 0, 1.0), ObserverCopy::new("a", "c", 0, 1.0)]),
            Err(CredenceError::DuplicateCopy(_))
        ));
    }

    #[test]
    fn page_examples() {
        let two = [
            PageObserver::new(ObserverCopy::new("1", "b", 0, 1.0), 0.9),
            PageObserver::new(ObserverCopy::new("2", "b", 0, 1.0), 0.1),
        ];
        assert!((page_aggregate(&two).unwrap() - 0.5).abs() < 1e-15);
        let weighted = [
            PageObserver::new(ObserverCopy::new("1", "b", 0, 2.0), 0.9),
            PageObserver::new(ObserverCopy::new("2", "b", 0, 1.0), 0.36),
        ];
        // (2·0.9 + 1·0.36) / 3
        assert!((page_aggregate(&weighted).unwrap() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn table_helpers() {
        let t = CredenceTable::from_weights([("a", 1.0), ("b", 3.0)]).unwrap();
        assert_eq!(t.get("b"), 0.75);
        let u = CredenceTable::from_weights([("a", 1.0)]).unwrap();
        assert_eq!(t.max_abs_diff(&u), 0.75);
        assert!(t.is_valid(1e-12));
    }
}
