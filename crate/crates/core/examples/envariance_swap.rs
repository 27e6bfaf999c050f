//! Swapping environment records of equal-weight branches, then undoing it on
//! the system side.

use branchlab::credence::{swap_check, swap_closure};
use branchlab::verify::measured_state;

fn main() {
    let s = measured_state(&[1, 1, 1], &[0.0, 1.0, 2.5]);
    let r = swap_check(&s, &["D"], &["E"], 0, 2).expect("swappable");
    println!("{} <-> {}: reduced change {:.1e}, restored {:.1e}, pass {}", r.branch_i, r.branch_j, r.reduced_deviation, r.restoration_deviation, r.pass);
    let (classes, table) = swap_closure(&s, &["D"], &["E"]).expect("closure");
    println!("classes {classes:?}");
    println!("table {:?}", table.map(|t| t.entries));
    let uneven = measured_state(&[1, 2], &[0.0, 0.0]);
    println!("unequal weights: {}", swap_check(&uneven, &["D"], &["E"], 0, 1).unwrap_err());
}
