//! Equal-amplitude refinement turns Born weights into counts.

use branchlab::credence::{born_credences, refine_and_count, DEFAULT_MAX_DENOMINATOR};
use branchlab::verify::measured_state;

fn main() {
    // Squared weights 2/7, 1/7, 4/7 with arbitrary phases.
    let s = measured_state(&[2, 1, 4], &[0.3, 2.0, -1.1]);
    let out = refine_and_count(&s, "D", "E", DEFAULT_MAX_DENOMINATOR).expect("refines");
    let born = born_credences(&s.reduced(&["A", "D"]).unwrap(), &["D"], 1e-12).unwrap();
    println!("T² = {} equal-amplitude pieces", out.rational.t_sq);
    for (record, n) in &out.counts {
        println!("  {record}: {n} pieces -> {:.6} (Born {:.6})", out.table.get(record), born.get(record));
    }
}
