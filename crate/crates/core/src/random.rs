//! Seeded generators for randomized checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qstate::{Space, StateVector, SubsystemLabel, UnitaryOp, C64};

pub type TrialRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut TrialRng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed unitary matrix of size `n` (QR of a Ginibre matrix with
/// the phase of R's diagonal folded back into Q).
pub fn unitary_matrix(rng: &mut TrialRng, n: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn unitary(rng: &mut TrialRng, targets: Vec<SubsystemLabel>) -> UnitaryOp {
    let n = targets.iter().map(|l| l.dim).product();
    UnitaryOp::new(targets, unitary_matrix(rng, n)).expect("QR output is unitary")
}

/// Normalized Gaussian state over `space`.
pub fn state(rng: &mut TrialRng, space: Space) -> StateVector {
    let amps = (0..space.dim()).map(|_| gaussian(rng)).collect();
    StateVector::new(space, amps).and_then(|s| s.normalize()).expect("nonzero Gaussian vector")
}

pub fn phase(rng: &mut TrialRng) -> f64 {
    rng.random_range(0.0..std::f64::consts::TAU)
}

/// Positive integers `c_k²` with `n` parts summing to at most `max_total`.
pub fn rational_parts(rng: &mut TrialRng, n: usize, max_total: u64) -> Vec<u64> {
    assert!(n >= 1 && max_total >= n as u64);
    let total = rng.random_range(n as u64..=max_total);
    // Random composition of `total` into `n` positive parts.
    let mut cuts: Vec<u64> = Vec::new();
    while cuts.len() < n - 1 {
        let c = rng.random_range(1..total);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        parts.push(c - prev);
        prev = c;
    }
    parts
}
