//! Quantum Sleeping Beauty under the weighted copy rule.

use branchlab::scenario::{builtin, solve, Predicate, Query, Rule};

fn main() {
    for name in ["two_branch_beauty", "three_branch_beauty"] {
        let sc = builtin(name).expect("bundled scenario");
        let s = solve(&sc, &Query::new(4, "beauty", Predicate::record("D", "↑"), Rule::StrongEsp)).expect("solves");
        println!("{name}: P(up) = {:.4}", s.probability);
        for (copy, p) in s.table.iter() {
            println!("  {copy:<18} {p:.4}");
        }
    }
}
