use branchlab::branching::state_branches;
use branchlab::credence::{
    born_credences, born_from_branches, compare_reduced, esp_invariance_check, indifference_credences, refine_and_count,
    replay_proof, strong_esp, ObserverCopy, ProofCase, DEFAULT_MAX_DENOMINATOR,
};
use branchlab::qstate::SubsystemLabel;
use branchlab::random;
use branchlab::verify::measured_state;
use indexmap::IndexMap;
use proptest::prelude::*;

fn parts() -> impl Strategy<Value = (Vec<u64>, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(1u64..=8, n).prop_filter("T² ≤ 50", |c| c.iter().sum::<u64>() <= 50),
            prop::collection::vec(0.0..std::f64::consts::TAU, n),
        )
    })
}

fn born(c_sq: &[u64], phases: &[f64]) -> branchlab::credence::CredenceTable {
    let s = measured_state(c_sq, phases);
    born_credences(&s.reduced(&["A", "D"]).unwrap(), &["D"], 1e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counting_reproduces_born((c_sq, phases) in parts()) {
        let s = measured_state(&c_sq, &phases);
        let out = refine_and_count(&s, "D", "E", DEFAULT_MAX_DENOMINATOR).unwrap();
        prop_assert!(out.table.max_abs_diff(&born(&c_sq, &phases)) < 1e-10);
        prop_assert!(compare_reduced(&s, &out.refined, &["A", "D"]).unwrap() < 1e-12);
        // Each record is counted c_k² times over T² pieces.
        let total: u64 = c_sq.iter().sum();
        let g = out.rational.t_sq;
        for (k, &c) in c_sq.iter().enumerate() {
            prop_assert_eq!(out.counts[&format!("d{}", k + 1)] * total, c * g);
        }
    }

    #[test]
    fn phases_never_move_credences((c_sq, phases) in parts()) {
        let zero = vec![0.0; c_sq.len()];
        prop_assert!(born(&c_sq, &phases).max_abs_diff(&born(&c_sq, &zero)) < 1e-12);
        let a = refine_and_count(&measured_state(&c_sq, &phases), "D", "E", DEFAULT_MAX_DENOMINATOR).unwrap();
        let b = refine_and_count(&measured_state(&c_sq, &zero), "D", "E", DEFAULT_MAX_DENOMINATOR).unwrap();
        prop_assert_eq!(a.table, b.table);
    }

    #[test]
    fn environment_unitaries_leave_born(seed in any::<u64>(), (c_sq, phases) in parts()) {
        let s = measured_state(&c_sq, &phases);
        let mut rng = random::rng(seed);
        let u = random::unitary(&mut rng, vec![s.space().label("E").unwrap().clone()]);
        let r = esp_invariance_check(&s, &u, &["A", "D"], &["D"], 1e-12).unwrap();
        prop_assert!(r.deviation < 1e-10);
    }

    #[test]
    fn weighted_rule_limits((c_sq, phases) in parts(), w in 0.001f64..10.0, k in 1usize..=4) {
        let s = measured_state(&c_sq, &phases);
        let bs = state_branches(&s, &["D"], 1e-12).unwrap();
        // Equal weights, k copies per branch: the weighted rule counts copies.
        let copies: Vec<ObserverCopy> = bs
            .branches
            .iter()
            .flat_map(|b| (0..k).map(move |i| ObserverCopy::new(format!("{}#{i}", b.label), b.label.clone(), 1, w)))
            .collect();
        let per: IndexMap<String, usize> = bs.branches.iter().map(|b| (b.label.clone(), k)).collect();
        let counted = indifference_credences(&bs, &per).unwrap();
        let weighted = strong_esp(&copies).unwrap().coarsen(|id| id.split('#').next().unwrap().to_string());
        prop_assert!(weighted.max_abs_diff(&counted) < 1e-12);
        // One copy per branch at branch weight: Born.
        let one: Vec<ObserverCopy> = bs.branches.iter().map(|b| ObserverCopy::new(b.label.clone(), b.label.clone(), 1, b.weight)).collect();
        prop_assert!(strong_esp(&one).unwrap().max_abs_diff(&born_from_branches(&bs).unwrap()) < 1e-12);
    }

    #[test]
    fn weighted_rule_ignores_scale(ws in prop::collection::vec(0.001f64..5.0, 1..8), lambda in 1e-6f64..1e6) {
        let a: Vec<ObserverCopy> = ws.iter().enumerate().map(|(i, &w)| ObserverCopy::new(format!("c{i}"), "b", 0, w)).collect();
        let b: Vec<ObserverCopy> = a.iter().map(|c| ObserverCopy::new(&c.id, &c.branch, 0, c.weight * lambda)).collect();
        prop_assert!(strong_esp(&a).unwrap().max_abs_diff(&strong_esp(&b).unwrap()) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn general_proof_agrees_with_born(c_sq in prop::collection::vec(1u64..=4, 2..=3), seed in any::<u64>()) {
        let total: u64 = c_sq.iter().sum();
        let weights: Vec<f64> = c_sq.iter().map(|&c| c as f64 / total as f64).collect();
        let mut rng = random::rng(seed);
        let phases: Vec<f64> = c_sq.iter().map(|_| random::phase(&mut rng)).collect();
        let r = replay_proof(&ProofCase::General { weights, phases: phases.clone() }).unwrap();
        let concl = r.conclusion.expect("premises pass");
        prop_assert!(concl.max_abs_diff(&born(&c_sq, &phases)) < 1e-10);
    }
}

#[test]
fn worked_proofs() {
    let half = replay_proof(&ProofCase::HalfHalf).unwrap();
    assert!(half.premises.iter().all(|p| p.pass));
    let t = half.conclusion.unwrap();
    assert!((t.get("↑") - 0.5).abs() < 1e-10 && (t.get("↓") - 0.5).abs() < 1e-10);
    let third = replay_proof(&ProofCase::OneThirdTwoThirds).unwrap().conclusion.unwrap();
    assert!((third.get("↑") - 2.0 / 3.0).abs() < 1e-10 && (third.get("↓") - 1.0 / 3.0).abs() < 1e-10);
}

#[test]
fn labels_survive_refinement() {
    let s = measured_state(&[1, 2], &[0.0, 0.0]);
    let out = refine_and_count(&s, "D", "E", DEFAULT_MAX_DENOMINATOR).unwrap();
    assert!(out.refined.space().label("E'").is_some());
    assert_eq!(out.refined.space().label("D"), s.space().label("D"));
    let _: &SubsystemLabel = out.refined.space().label("A").unwrap();
}
