use serde::{Deserialize, Serialize};

use super::proof::UnionFind;
use super::{born_credences, CredenceError, CredenceTable, Result};
use crate::branching::{components, Component};
use crate::qstate::{StateVector, UnitaryOp};

const SUPPORT_TOL: f64 = 1e-14;
const PASS_TOL: f64 = 1e-10;

/// Largest entrywise difference between the reduced states of `a` and `b`
/// on `keep`.
pub fn compare_reduced(a: &StateVector, b: &StateVector, keep: &[&str]) -> Result<f64> {
    Ok(a.reduced(keep)?.max_abs_diff(&b.reduced(keep)?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EspReport {
    pub before: CredenceTable,
    pub after: CredenceTable,
    /// Largest change of a Born credence.
    pub deviation: f64,
    /// Largest entrywise change of the agent+detector reduced state.
    pub reduced_deviation: f64,
    pub pass: bool,
}

/// Apply an environment-only unitary and compare Born credences for the
/// agent+detector subsystems `keep`, branched on `pointers`.
pub fn esp_invariance_check(s: &StateVector, u_env: &UnitaryOp, keep: &[&str], pointers: &[&str], eps: f64) -> Result<EspReport> {
    for t in u_env.target_names() {
        if keep.contains(&t) || pointers.contains(&t) {
            return Err(CredenceError::NotEnvironmentOnly(t.to_string()));
        }
    }
    let after_state = s.apply_unitary(u_env)?;
    let rho_before = s.reduced(keep)?;
    let rho_after = after_state.reduced(keep)?;
    let before = born_credences(&rho_before, pointers, eps)?;
    let after = born_credences(&rho_after, pointers, eps)?;
    let deviation = before.max_abs_diff(&after);
    let reduced_deviation = rho_before.max_abs_diff(&rho_after)?;
    Ok(EspReport { before, after, deviation, reduced_deviation, pass: deviation < PASS_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapReport {
    pub branch_i: String,
    pub branch_j: String,
    /// Change of the system reduced state under the environment swap.
    pub reduced_deviation: f64,
    /// Largest amplitude-modulus mismatch after the compensating system swap.
    pub restoration_deviation: f64,
    /// `|⟨ψ|ψ''⟩|` between the original and the doubly swapped state.
    pub overlap: f64,
    pub pass: bool,
}

fn component_label(s: &StateVector, sys_pos: &[usize], env_pos: &[usize], c: &Component) -> String {
    let labels = s.space().labels();
    let sys: Vec<&str> = sys_pos.iter().map(|&p| labels[p].ket(c.coords[0][p])).collect();
    let env: Vec<&str> = env_pos.iter().map(|&p| labels[p].ket(c.coords[0][p])).collect();
    format!("{}@{}", sys.join(","), env.join(","))
}

fn transposition(s: &StateVector, names: &[&str], a: &[usize], b: &[usize]) -> Result<UnitaryOp> {
    let labels: Vec<_> = names.iter().map(|n| s.space().label(n).cloned().expect("resolved")).collect();
    let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
    let flat = |c: &[usize]| c.iter().zip(&dims).fold(0, |acc, (&x, &d)| acc * d + x);
    let (ia, ib) = (flat(a), flat(b));
    let n: usize = dims.iter().product();
    let image: Vec<usize> = (0..n).map(|k| if k == ia { ib } else if k == ib { ia } else { k }).collect();
    Ok(UnitaryOp::permutation(labels, &image)?)
}

/// Branch components of `s`, one per environment record, each required to
/// carry a single `sys` record.
fn swap_components(s: &StateVector, sys: &[&str], env: &[&str]) -> Result<(Vec<usize>, Vec<usize>, Vec<Component>)> {
    let sys_pos: Vec<usize> = sys.iter().map(|n| s.space().require(n)).collect::<std::result::Result<_, _>>()?;
    let env_pos: Vec<usize> = env.iter().map(|n| s.space().require(n)).collect::<std::result::Result<_, _>>()?;
    if let Some(n) = sys.iter().find(|n| env.contains(n)) {
        return Err(CredenceError::InvalidInput(format!("`{n}` is both system and environment")));
    }
    let comps = components(s, env, SUPPORT_TOL)?;
    Ok((sys_pos, env_pos, comps))
}

/// Envariance check for branches `i` and `j` (indices into the components
/// of `s` keyed by the `env` records).
///
/// Swapping the two environment records leaves the `sys` reduced state
/// alone; when the weights are equal a compensating swap of the `sys` records
/// restores the state, so the two branches must be equiprobable.
pub fn swap_check(s: &StateVector, sys: &[&str], env: &[&str], i: usize, j: usize) -> Result<SwapReport> {
    let (sys_pos, env_pos, comps) = swap_components(s, sys, env)?;
    let (ci, cj) = match (comps.get(i), comps.get(j)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CredenceError::NotSwappable(format!("no branch {i} or {j} among {}", comps.len()))),
    };
    for c in [ci, cj] {
        let first: Vec<usize> = sys_pos.iter().map(|&p| c.coords[0][p]).collect();
        if c.coords.iter().any(|x| sys_pos.iter().map(|&p| x[p]).collect::<Vec<_>>() != first) {
            return Err(CredenceError::NotSwappable("a branch spans several system records".into()));
        }
    }
    if (ci.weight - cj.weight).abs() > 1e-12 {
        return Err(CredenceError::NotSwappable(format!("weights {} and {} differ", ci.weight, cj.weight)));
    }
    let label_i = component_label(s, &sys_pos, &env_pos, ci);
    let label_j = component_label(s, &sys_pos, &env_pos, cj);

    let u_env = transposition(s, env, &ci.key, &cj.key)?;
    let swapped = s.apply_unitary(&u_env)?;
    let reduced_deviation = compare_reduced(s, &swapped, sys)?;

    let sys_i: Vec<usize> = sys_pos.iter().map(|&p| ci.coords[0][p]).collect();
    let sys_j: Vec<usize> = sys_pos.iter().map(|&p| cj.coords[0][p]).collect();
    let u_sys = transposition(s, sys, &sys_i, &sys_j)?;
    let restored = swapped.apply_unitary(&u_sys)?;
    let restoration_deviation = s
        .amps()
        .iter()
        .zip(restored.amps())
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    let overlap = s.inner(&restored)?.norm();
    let pass = reduced_deviation < PASS_TOL && restoration_deviation < PASS_TOL;
    Ok(SwapReport { branch_i: label_i, branch_j: label_j, reduced_deviation, restoration_deviation, overlap, pass })
}

/// Swap every equal-weight pair and return the resulting equiprobability
/// classes of branch labels, plus the uniform table when there is one class.
pub fn swap_closure(s: &StateVector, sys: &[&str], env: &[&str]) -> Result<(Vec<Vec<String>>, Option<CredenceTable>)> {
    let (sys_pos, env_pos, comps) = swap_components(s, sys, env)?;
    let labels: Vec<String> = comps.iter().map(|c| component_label(s, &sys_pos, &env_pos, c)).collect();
    let mut uf = UnionFind::new(comps.len());
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            if (comps[i].weight - comps[j].weight).abs() > 1e-12 {
                continue;
            }
            if swap_check(s, sys, env, i, j)?.pass {
                uf.union(i, j);
            }
        }
    }
    let classes = uf.classes();
    let out: Vec<Vec<String>> = classes.iter().map(|c| c.iter().map(|&k| labels[k].clone()).collect()).collect();
    let table = if classes.len() == 1 {
        Some(CredenceTable::from_weights(labels.iter().map(|l| (l.clone(), 1.0)))?)
    } else {
        None
    };
    Ok((out, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{real, Space, SubsystemLabel};
    use crate::random;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn entangled(a: f64) -> StateVector {
        let space = Space::new(vec![
            SubsystemLabel::with_kets("s", ["↑", "↓"]).unwrap(),
            SubsystemLabel::with_kets("E", ["E1", "E2"]).unwrap(),
        ])
        .unwrap();
        StateVector::from_sparse(space, [(vec![0, 0], real(a.sqrt())), (vec![1, 1], real((1.0 - a).sqrt()))]).unwrap()
    }

    #[test]
    fn environment_swap_of_equal_branches() {
        let s = entangled(0.5);
        let r = swap_check(&s, &["s"], &["E"], 0, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.overlap - 1.0).abs() < 1e-12);
        let self_swap = swap_check(&s, &["s"], &["E"], 0, 0).unwrap();
        assert!(self_swap.pass);
        let (classes, table) = swap_closure(&s, &["s"], &["E"]).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(table.unwrap().get("↑@E1"), 0.5);
    }

    #[test]
    fn unequal_branches_are_not_swappable() {
        let s = entangled(2.0 / 3.0);
        assert!(matches!(swap_check(&s, &["s"], &["E"], 0, 1), Err(CredenceError::NotSwappable(_))));
    }

    #[test]
    fn swapped_amplitudes_match_expected_state() {
        let s = entangled(0.5);
        let (sys_pos, _, comps) = swap_components(&s, &["s"], &["E"]).unwrap();
        assert_eq!(sys_pos, vec![0]);
        let u = transposition(&s, &["E"], &comps[0].key, &comps[1].key).unwrap();
        let t = s.apply_unitary(&u).unwrap();
        assert!((t.amp(&[0, 1]) - real(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((t.amp(&[1, 0]) - real(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn environment_unitary_keeps_born() {
        let space = Space::new(vec![
            SubsystemLabel::with_kets("A", ["R"]).unwrap(),
            SubsystemLabel::with_kets("D", ["↑", "↓"]).unwrap(),
            SubsystemLabel::new("E", 3).unwrap(),
        ])
        .unwrap();
        let s = StateVector::from_sparse(space, [(vec![0, 0, 0], real(0.6)), (vec![0, 1, 1], real(0.8))]).unwrap();
        let mut rng = random::rng(7);
        let u = random::unitary(&mut rng, vec![s.space().label("E").unwrap().clone()]);
        let r = esp_invariance_check(&s, &u, &["A", "D"], &["D"], 1e-10).unwrap();
        assert!(r.pass && r.reduced_deviation < 1e-12);
        let bad = random::unitary(&mut rng, vec![s.space().label("D").unwrap().clone()]);
        assert_eq!(esp_invariance_check(&s, &bad, &["A", "D"], &["D"], 1e-10).unwrap_err(), CredenceError::NotEnvironmentOnly("D".into()));
    }
}
