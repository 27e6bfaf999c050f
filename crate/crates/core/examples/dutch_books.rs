//! The quantum and the duplication Dutch books, under each rule.

use branchlab::epistemics::dutch_book_check;
use branchlab::scenario::{builtin, Rule};

fn main() {
    for name in ["appendix_a_book", "dr_evil_book"] {
        let sc = builtin(name).expect("bundled scenario");
        for rule in Rule::ALL {
            let r = dutch_book_check(&sc, rule, &sc.bets).expect("book settles");
            let taken: Vec<&str> = r.decisions.iter().filter(|d| d.accepted).map(|d| d.id.as_str()).collect();
            println!("{name} {rule:<13} accepts {taken:?} nets {:?} sure loss {}", r.nets, r.sure_loss);
        }
    }
}
