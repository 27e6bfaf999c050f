//! Replay the two worked derivations of the Born rule, step by step.

use branchlab::credence::{replay_proof, ProofCase};

fn main() {
    for case in [ProofCase::HalfHalf, ProofCase::OneThirdTwoThirds] {
        let r = replay_proof(&case).expect("proof builds");
        println!("{}:", r.case);
        for p in &r.premises {
            println!("  [{}] {:<10} {} (deviation {:.1e})", if p.pass { "ok" } else { "!!" }, p.step, p.description, p.deviation);
        }
        match r.conclusion {
            Some(t) => println!("  conclusion {:?}", t.entries),
            None => println!("  no conclusion"),
        }
    }
}
