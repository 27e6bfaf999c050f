//! Confirming a wave function from observed outcomes.

use branchlab::epistemics::{confirm_sequence, theory_likelihoods, theory_priors};
use branchlab::scenario::builtin;

fn main() {
    let sc = builtin("what_wave_function").expect("bundled scenario");
    let priors = theory_priors(&sc);
    let lik = theory_likelihoods(&sc, "D", 2).expect("likelihoods");
    println!("likelihoods {lik:?}");
    let seen: Vec<String> = ["↑", "↑", "↓", "↑"].iter().map(|s| s.to_string()).collect();
    for (o, post) in seen.iter().zip(confirm_sequence(&priors, &lik, &seen).expect("updates")) {
        println!("after {o}: {post:?}");
    }
}
