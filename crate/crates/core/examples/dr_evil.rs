//! Classical duplication: credence splits evenly between the copies.

use branchlab::scenario::{builtin, solve_all};

fn main() {
    let sc = builtin("dr_evil").expect("bundled scenario");
    for s in solve_all(&sc).expect("solves") {
        let q = &s.query;
        println!("t{} {:<13} {} = {:.3}", q.time, q.rule.to_string(), q.label.as_deref().unwrap_or("P"), s.probability);
    }
}
