use branchlab::credence::CredenceTable;
use branchlab::epistemics::{bayes_update, confirm_sequence, dutch_book_check, expected_value, theory_likelihoods, theory_priors, Bet};
use branchlab::scenario::{builtin, Predicate, Rule};
use indexmap::IndexMap;
use proptest::prelude::*;

fn table(xs: &[(&str, f64)]) -> CredenceTable {
    CredenceTable { entries: xs.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
}

fn up_down(id: &str, t: u32, up: f64, down: f64) -> Bet {
    Bet::new(id, t, 0.0).pays("up", Predicate::record("D", "↑"), up).pays("down", Predicate::record("D", "↓"), down)
}

#[test]
fn born_never_books_bundled_pairs() {
    for name in ["appendix_a_book", "dr_evil_book"] {
        let sc = builtin(name).unwrap();
        let r = dutch_book_check(&sc, Rule::Born, &sc.bets).unwrap();
        assert!(!r.sure_loss, "{name}: {r:?}");
    }
}

#[test]
fn cost_twenty_pays_fifty_on_down() {
    let sc = builtin("once_or_twice").unwrap();
    let bet = Bet::new("fifty", 2, 20.0).pays("down", Predicate::record("D", "↓"), 50.0).pays("up", Predicate::record("D", "↑"), 0.0);
    for (rule, t, ev) in [
        (Rule::Born, 2, 5.0),
        (Rule::Born, 3, 5.0),
        (Rule::StrongEsp, 3, 5.0),
        (Rule::Indifference, 2, 5.0),
        (Rule::Indifference, 3, 50.0 / 3.0 - 20.0),
    ] {
        let mut b = bet.clone();
        b.offered_at = t;
        let r = dutch_book_check(&sc, rule, &[b]).unwrap();
        assert!((r.decisions[0].expected_value.unwrap() - ev).abs() < 1e-12, "{rule} t{t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn born_books_on_once_or_twice_never_lose_everywhere(
        a in -30.0f64..30.0, b in -30.0f64..30.0, c in -30.0f64..30.0, d in -30.0f64..30.0,
    ) {
        let sc = builtin("once_or_twice").unwrap();
        let book = [up_down("one", 2, a, b), up_down("two", 3, c, d)];
        let r = dutch_book_check(&sc, Rule::Born, &book).unwrap();
        prop_assert!(!r.sure_loss, "{:?}", r);
    }

    #[test]
    fn expected_value_is_linear(
        p in 0.0f64..1.0, q in 0.0f64..1.0, s in 0.0f64..1.0,
        x in -50.0f64..50.0, y in -50.0f64..50.0, u in -50.0f64..50.0, v in -50.0f64..50.0, k in -5.0f64..5.0,
    ) {
        let c1 = table(&[("up", p), ("down", 1.0 - p)]);
        let c2 = table(&[("up", q), ("down", 1.0 - q)]);
        let mix = table(&[("up", s * p + (1.0 - s) * q), ("down", s * (1.0 - p) + (1.0 - s) * (1.0 - q))]);
        let b = up_down("b", 0, x, y);
        let ev = |b: &Bet, c: &CredenceTable| expected_value(b, c).unwrap();
        prop_assert!((ev(&b, &mix) - (s * ev(&b, &c1) + (1.0 - s) * ev(&b, &c2))).abs() < 1e-9);
        let sum = up_down("sum", 0, x + k * u, y + k * v);
        prop_assert!((ev(&sum, &c1) - (ev(&b, &c1) + k * ev(&up_down("o", 0, u, v), &c1))).abs() < 1e-9);
    }

    #[test]
    fn posteriors_ignore_common_likelihood_scale(prior in 0.01f64..0.99, l1 in 0.01f64..1.0, l2 in 0.01f64..1.0, scale in 0.01f64..1.0) {
        let priors: IndexMap<String, f64> = [("T1".to_string(), prior), ("T2".to_string(), 1.0 - prior)].into();
        let lik = |a: f64, b: f64| -> IndexMap<String, IndexMap<String, f64>> {
            [
                ("T1".to_string(), [("o".to_string(), a), ("rest".to_string(), 1.0 - a)].into()),
                ("T2".to_string(), [("o".to_string(), b), ("rest".to_string(), 1.0 - b)].into()),
            ]
            .into()
        };
        let plain = bayes_update(&priors, &lik(l1, l2), "o").unwrap();
        let scaled = bayes_update(&priors, &lik(l1 * scale, l2 * scale), "o").unwrap();
        prop_assert!((plain["T1"] - scaled["T1"]).abs() < 1e-12);
    }
}

fn wave_function() -> (IndexMap<String, f64>, IndexMap<String, IndexMap<String, f64>>) {
    let sc = builtin("what_wave_function").unwrap();
    (theory_priors(&sc), theory_likelihoods(&sc, "D", 2).unwrap())
}

#[test]
fn ten_ups() {
    let (priors, lik) = wave_function();
    let ups = vec!["↑".to_string(); 10];
    let post = confirm_sequence(&priors, &lik, &ups).unwrap();
    let expect = 0.9f64.powi(10) * 0.5 / (0.9f64.powi(10) * 0.5 + 0.1f64.powi(10) * 0.5);
    assert!((post[9]["P↑"] - expect).abs() < 1e-12);
    assert!((post[0]["P↑"] - 0.9).abs() < 1e-12);
}

#[test]
fn up_up_down() {
    let (priors, lik) = wave_function();
    let seq: Vec<String> = ["↑", "↑", "↓"].iter().map(|s| s.to_string()).collect();
    let post = confirm_sequence(&priors, &lik, &seq).unwrap();
    let a = 0.9 * 0.9 * 0.1 * 0.5;
    let b = 0.1 * 0.1 * 0.9 * 0.5;
    assert!((post[2]["P↑"] - a / (a + b)).abs() < 1e-12);
    assert!((post[2]["P↓"] - b / (a + b)).abs() < 1e-12);
}
