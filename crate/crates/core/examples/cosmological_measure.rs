//! Observer measure of decaying branches with a growing observer density.

use branchlab::cosmo::{branch_measure, normalize_families, quadrature_measure, BranchHistory};

fn main() {
    for gamma in [1.0, 0.6, 0.5, 0.4] {
        let h = BranchHistory::exponential("f", 1.0, gamma, 1.0);
        let m = branch_measure(&h).expect("valid history");
        match m.finite() {
            Some(v) => {
                let q = quadrature_measure(&h, None).expect("converges");
                println!("γ = {gamma}: {v:.6} (quadrature {:.6} ± {:.1e})", q.finite().unwrap(), q.error_estimate);
            }
            None => println!("γ = {gamma}: divergent"),
        }
    }
    let fams = [BranchHistory::exponential("fast", 1.0, 2.0, 1.0), BranchHistory::exponential("slow", 1.0, 1.0, 1.0)];
    println!("{:?}", normalize_families(&fams).expect("normalizes").table);
}
