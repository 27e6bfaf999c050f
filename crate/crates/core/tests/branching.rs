use branchlab::branching::{apply_wiring, conditional_measure, measure, state_branches, Measurement, Wiring};
use branchlab::qstate::{real, StateVector, SubsystemLabel, C64};
use branchlab::random;
use proptest::prelude::*;

fn ready(l: SubsystemLabel) -> (SubsystemLabel, Vec<C64>) {
    let mut v = vec![real(0.0); l.dim];
    v[0] = real(1.0);
    (l, v)
}

fn label(name: &str, kets: &[&str]) -> SubsystemLabel {
    SubsystemLabel::with_kets(name, kets.iter().copied()).unwrap()
}

/// Alice, a detector, a particle in `amps`, an environment and a bystander.
fn lab(amps: Vec<C64>, bystander: Vec<C64>) -> StateVector {
    let n = amps.len();
    StateVector::product(vec![
        ready(SubsystemLabel::new("A", 1).unwrap()),
        ready(SubsystemLabel::new("D", n + 1).unwrap()),
        (SubsystemLabel::new("p", n).unwrap(), amps),
        ready(SubsystemLabel::new("E", n + 1).unwrap()),
        (SubsystemLabel::new("q", 2).unwrap(), bystander),
    ])
    .unwrap()
}

fn amplitudes(seed: u64, n: usize) -> Vec<C64> {
    let mut rng = random::rng(seed);
    let s = random::state(&mut rng, branchlab::qstate::Space::new(vec![SubsystemLabel::new("x", n).unwrap()]).unwrap());
    s.amps().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branch_weights_are_squared_amplitudes(seed in any::<u64>(), n in 2usize..=5) {
        let amps = amplitudes(seed, n);
        let s = measure(&lab(amps.clone(), amplitudes(seed ^ 1, 2)), &Measurement::new("p", "D", "E")).unwrap();
        let bs = state_branches(&s, &["D"], 1e-14).unwrap();
        for (k, a) in amps.iter().enumerate() {
            let rec = s.space().label("D").unwrap().ket(k + 1).to_string();
            prop_assert!((bs.weight(&rec) - a.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_keeps_norm_and_bystanders(seed in any::<u64>(), n in 2usize..=4) {
        let s = lab(amplitudes(seed, n), amplitudes(seed ^ 7, 2));
        let t = measure(&s, &Measurement::new("p", "D", "E")).unwrap();
        prop_assert!((t.norm() - 1.0).abs() < 1e-12);
        let before = s.reduced(&["q"]).unwrap();
        let after = t.reduced(&["q"]).unwrap();
        prop_assert!(before.max_abs_diff(&after).unwrap() < 1e-12);
        // The measured particle keeps its populations too.
        let pb = s.reduced(&["p"]).unwrap();
        let pa = t.reduced(&["p"]).unwrap();
        for k in 0..n {
            prop_assert!((pb.entry(&[k], &[k]).re - pa.entry(&[k], &[k]).re).abs() < 1e-12);
        }
    }
}

#[test]
fn nested_conditionals_multiply_amplitudes() {
    let spin = |name: &str, up: f64| (label(name, &["↑", "↓"]), vec![real(up.sqrt()), real((1.0 - up).sqrt())]);
    let det = |name: &str| ready(label(name, &["R", "↑", "↓", "X"]));
    let s = StateVector::product(vec![
        spin("a", 0.3),
        spin("b", 0.6),
        spin("c", 0.8),
        det("D1"),
        det("D2"),
        det("D3"),
        ready(SubsystemLabel::new("E", 9).unwrap()),
    ])
    .unwrap();
    let m = |sys: &str, d: &str| Measurement::new(sys, d, "E").with_outcomes(["↑", "↓"]);
    let s = measure(&s, &m("a", "D1")).unwrap();
    let s = conditional_measure(&s, &[("D1".into(), "↑".into())], &m("b", "D2")).unwrap();
    let s = conditional_measure(&s, &[("D2".into(), "↓".into())], &m("c", "D3")).unwrap();
    let bs = state_branches(&s, &["D1", "D2", "D3"], 1e-14).unwrap();
    // Hand expansion: D1=↓ stops; D1=↑ then b; D2=↓ then c.
    let expect = [
        ("↑,↑,X", 0.3 * 0.6),
        ("↑,↓,↑", 0.3 * 0.4 * 0.8),
        ("↑,↓,↓", 0.3 * 0.4 * 0.2),
        ("↓,X,X", 0.7),
    ];
    assert_eq!(bs.len(), expect.len(), "{:?}", bs.labels());
    for (l, w) in expect {
        assert!((bs.weight(l) - w).abs() < 1e-12, "{l}: {}", bs.weight(l));
    }
}

#[test]
fn wiring_leaves_alice_and_detector() {
    let s = StateVector::product(vec![
        ready(label("A", &["R"])),
        ready(label("D1", &["R", "↑", "↓"])),
        (label("a", &["↑", "↓"]), vec![real(0.6), C64::new(0.0, 0.8)]),
        ready(label("S", &["blank", "♥", "♦"])),
        ready(SubsystemLabel::new("E", 3).unwrap()),
    ])
    .unwrap();
    let s = measure(&s, &Measurement::new("a", "D1", "E").with_outcomes(["↑", "↓"])).unwrap();
    let w = Wiring::from_pairs("D1", [("↑", "♥"), ("↓", "♦")]);
    let t = apply_wiring(&s, &w, "S").unwrap();
    let d = s.reduced(&["A", "D1"]).unwrap().max_abs_diff(&t.reduced(&["A", "D1"]).unwrap()).unwrap();
    assert!(d < 1e-12);
    let bs = state_branches(&t, &["D1", "S"], 1e-14).unwrap();
    assert!((bs.weight("↑,♥") - 0.36).abs() < 1e-12);
    assert!((bs.weight("↓,♦") - 0.64).abs() < 1e-12);
}
