use indexmap::IndexMap;
use nalgebra::DMatrix;

use super::{rationalize, CredenceError, CredenceTable, RationalWeights, Result};
use crate::branching::components;
use crate::qstate::{tensor, StateVector, SubsystemLabel, UnitaryOp, C64};

const SUPPORT_TOL: f64 = 1e-14;

/// Name of the ancilla that [`equal_amplitude_refine`] adds next to `env`.
pub fn ancilla_name(env: &str) -> String {
    format!("{env}'")
}

/// Real unitary whose first column is `(1/c)(1, …, 1, 0, …)` with `c²` ones.
fn spreader(dim: usize, c_sq: usize) -> DMatrix<C64> {
    let mut v = vec![0.0; dim];
    let amp = 1.0 / (c_sq as f64).sqrt();
    v[..c_sq].iter_mut().for_each(|x| *x = amp);
    // Householder reflection taking e_0 to v.
    let mut w = v.iter().map(|x| -x).collect::<Vec<_>>();
    w[0] += 1.0;
    let norm_sq: f64 = w.iter().map(|x| x * x).sum();
    if norm_sq < 1e-30 {
        return DMatrix::identity(dim, dim);
    }
    DMatrix::from_fn(dim, dim, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        C64::new(id - 2.0 * w[i] * w[j] / norm_sq, 0.0)
    })
}

/// Split each environment record `|E_k⟩` into `c_k²` equal pieces.
///
/// Branches are taken in ascending order of their `env` record and matched
/// to `rw.c_sq` in that order. An ancilla named `{env}'` is appended to the
/// space; the map `|E_k⟩|0⟩ → |E_k⟩ (1/c_k) Σ_j |j⟩` is a unitary on
/// `env ⊗ ancilla` controlled by the record, so the agent+detector reduced
/// state and every branch phase are untouched.
pub fn equal_amplitude_refine(s: &StateVector, rw: &RationalWeights, env: &str) -> Result<StateVector> {
    let mut comps = components(s, &[env], SUPPORT_TOL)?;
    comps.sort_by(|a, b| a.key.cmp(&b.key));
    let got: Vec<f64> = comps.iter().map(|c| c.weight).collect();
    let expected = rw.weights();
    let tol = rw.approximation_error + 1e-9;
    if got.len() != expected.len() || got.iter().zip(&expected).any(|(g, e)| (g - e).abs() > tol) {
        return Err(CredenceError::WeightMismatch { expected, got });
    }
    let env_label = s.space().label(env).expect("components resolved the label").clone();
    let anc_dim = rw.max_c_sq() as usize;
    let mut anc_amps = vec![C64::new(0.0, 0.0); anc_dim];
    anc_amps[0] = C64::new(1.0, 0.0);
    let anc = SubsystemLabel::new(ancilla_name(env), anc_dim)?;
    let extended = tensor(s, &StateVector::single(anc.clone(), anc_amps)?)?;

    let dim = env_label.dim * anc_dim;
    let mut u = DMatrix::identity(dim, dim);
    for (comp, &c_sq) in comps.iter().zip(&rw.c_sq) {
        let r = comp.key[0];
        let block = spreader(anc_dim, c_sq as usize);
        u.view_mut((r * anc_dim, r * anc_dim), (anc_dim, anc_dim)).copy_from(&block);
    }
    let op = UnitaryOp::new(vec![env_label, anc], u)?;
    Ok(extended.apply_unitary(&op)?)
}

/// Result of refining a state and counting its equal-amplitude components.
#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub table: CredenceTable,
    /// Number of refined components per detector record.
    pub counts: IndexMap<String, u64>,
    pub rational: RationalWeights,
    pub refined: StateVector,
}

/// Probabilities by counting: refine to equal amplitudes, then tally the
/// detector record of each component with integer arithmetic.
pub fn refine_and_count(s: &StateVector, detector: &str, env: &str, max_denominator: u64) -> Result<RefineOutcome> {
    let mut comps = components(s, &[env], SUPPORT_TOL)?;
    comps.sort_by(|a, b| a.key.cmp(&b.key));
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    let weights: Vec<f64> = comps.iter().map(|c| c.weight / total).collect();
    let rational = rationalize(&weights, max_denominator)?;
    let refined = equal_amplitude_refine(s, &rational, env)?;

    let anc = ancilla_name(env);
    let det_pos = refined.space().require(detector)?;
    let det_label = refined.space().labels()[det_pos].clone();
    let mut counts: IndexMap<String, u64> = IndexMap::new();
    for comp in components(&refined, &[env, &anc], SUPPORT_TOL)? {
        let first = comp.coords[0][det_pos];
        if comp.coords.iter().any(|c| c[det_pos] != first) {
            return Err(CredenceError::InvalidInput(format!("a component spans several `{detector}` records")));
        }
        *counts.entry(det_label.ket(first).to_string()).or_insert(0) += 1;
    }
    let counted: u64 = counts.values().sum();
    if counted != rational.t_sq {
        return Err(CredenceError::WeightMismatch {
            expected: vec![rational.t_sq as f64],
            got: vec![counted as f64],
        });
    }
    let entries = counts.iter().map(|(k, &n)| (k.clone(), n as f64 / rational.t_sq as f64)).collect();
    Ok(RefineOutcome { table: CredenceTable { entries }, counts, rational, refined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{measure, Measurement};
    use crate::credence::born_credences;
    use crate::qstate::real;

    fn measured(up_sq: f64) -> StateVector {
        let s = StateVector::product(vec![
            (SubsystemLabel::with_kets("A", ["R"]).unwrap(), vec![real(1.0)]),
            (SubsystemLabel::with_kets("D", ["R", "↑", "↓"]).unwrap(), vec![real(1.0), real(0.0), real(0.0)]),
            (SubsystemLabel::with_kets("a", ["↑", "↓"]).unwrap(), vec![real(up_sq.sqrt()), real((1.0 - up_sq).sqrt())]),
            (SubsystemLabel::new("E", 3).unwrap(), vec![real(1.0), real(0.0), real(0.0)]),
        ])
        .unwrap();
        measure(&s, &Measurement::new("a", "D", "E")).unwrap()
    }

    #[test]
    fn two_thirds_refines_to_three_components() {
        let s = measured(2.0 / 3.0);
        let out = refine_and_count(&s, "D", "E", 100).unwrap();
        assert_eq!(out.counts["↑"], 2);
        assert_eq!(out.counts["↓"], 1);
        assert_eq!(out.table.get("↑"), 2.0 / 3.0);
        let comps = components(&out.refined, &["E", "E'"], 1e-14).unwrap();
        assert_eq!(comps.len(), 3);
        for c in &comps {
            assert!((c.weight - 1.0 / 3.0).abs() < 1e-12);
        }
        let before = s.reduced(&["A", "D"]).unwrap();
        let after = out.refined.reduced(&["A", "D"]).unwrap();
        assert!(before.max_abs_diff(&after).unwrap() < 1e-12);
        let born = born_credences(&before, &["D"], 1e-10).unwrap();
        assert!(born.max_abs_diff(&out.table) < 1e-12);
    }

    #[test]
    fn half_half_is_unchanged() {
        let s = measured(0.5);
        let out = refine_and_count(&s, "D", "E", 100).unwrap();
        assert_eq!(out.rational.t_sq, 2);
        assert_eq!(components(&out.refined, &["E", "E'"], 1e-14).unwrap().len(), 2);
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        let s = measured(0.5);
        let rw = RationalWeights::exact(vec![2, 1]).unwrap();
        assert!(matches!(equal_amplitude_refine(&s, &rw, "E"), Err(CredenceError::WeightMismatch { .. })));
    }

    #[test]
    fn spreader_first_column() {
        let m = spreader(5, 3);
        for i in 0..5 {
            let want = if i < 3 { 1.0 / 3f64.sqrt() } else { 0.0 };
            assert!((m[(i, 0)].re - want).abs() < 1e-15);
        }
    }
}
