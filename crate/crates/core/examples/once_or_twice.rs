//! Branch counting against Born weights in the once-or-twice experiment.

use branchlab::scenario::{builtin, run, solve, Predicate, Query, Rule};

fn main() {
    let sc = builtin("once_or_twice").expect("bundled scenario");
    let ws = run(&sc, 3).expect("runs");
    println!("branches at t3:");
    for b in &ws.branches {
        println!("  {:<6} {:.4}", b.label, b.weight);
    }
    let down = Predicate::record("D", "↓");
    for t in [2, 3] {
        for rule in Rule::ALL {
            let s = solve(&sc, &Query::new(t, "alice", down.clone(), rule)).expect("solves");
            println!("t{t} {rule:<13} P(down) = {:.4}", s.probability);
        }
    }
}
