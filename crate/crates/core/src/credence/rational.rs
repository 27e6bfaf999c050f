use serde::{Deserialize, Serialize};

use super::{CredenceError, Result};

pub const DEFAULT_MAX_DENOMINATOR: u64 = 10_000;

/// Squared amplitudes `c_k² / T²` with a common denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalWeights {
    pub c_sq: Vec<u64>,
    pub t_sq: u64,
    pub approximation_error: f64,
}

impl RationalWeights {
    /// Exact weights; `c_sq` must all be positive.
    pub fn exact(c_sq: Vec<u64>) -> Result<Self> {
        if c_sq.is_empty() || c_sq.contains(&0) {
            return Err(CredenceError::InvalidInput("squared coefficients must be positive".into()));
        }
        let t_sq = c_sq.iter().sum();
        Ok(Self { c_sq, t_sq, approximation_error: 0.0 })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.c_sq.iter().map(|&c| c as f64 / self.t_sq as f64).collect()
    }

    pub fn max_c_sq(&self) -> u64 {
        self.c_sq.iter().copied().max().unwrap_or(1)
    }
}

/// Split `q` into positive parts close to `w_k · q` (largest remainder).
fn apportion(weights: &[f64], q: u64) -> Vec<u64> {
    let n = weights.len();
    let ideal: Vec<f64> = weights.iter().map(|w| w * q as f64).collect();
    let mut parts: Vec<u64> = ideal.iter().map(|x| x.floor().max(1.0) as u64).collect();
    let mut total: u64 = parts.iter().sum();
    while total < q {
        // Give a unit to the part furthest below its ideal.
        let k = (0..n)
            .max_by(|&a, &b| (ideal[a] - parts[a] as f64).total_cmp(&(ideal[b] - parts[b] as f64)).then(b.cmp(&a)))
            .expect("nonempty");
        parts[k] += 1;
        total += 1;
    }
    while total > q {
        // Take a unit from the part furthest above its ideal that can spare it.
        let k = (0..n)
            .filter(|&k| parts[k] > 1)
            .max_by(|&a, &b| (parts[a] as f64 - ideal[a]).total_cmp(&(parts[b] as f64 - ideal[b])).then(b.cmp(&a)))
            .expect("q ≥ n leaves a part above 1");
        parts[k] -= 1;
        total -= 1;
    }
    parts
}

/// Best common-denominator approximation of `weights` with `T² ≤ max_denominator`.
///
/// Every `T²` is tried; the smallest maximum error wins and ties go to the
/// smaller denominator.
pub fn rationalize(weights: &[f64], max_denominator: u64) -> Result<RationalWeights> {
    if weights.is_empty() {
        return Err(CredenceError::InvalidInput("no weights".into()));
    }
    if max_denominator == 0 {
        return Err(CredenceError::InvalidInput("max_denominator must be at least 1".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        let bad = weights.iter().copied().find(|w| !w.is_finite() || *w < 0.0).unwrap_or(f64::NAN);
        return Err(CredenceError::InvalidWeight(bad));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(CredenceError::InvalidInput(format!("weights sum to {sum}, not 1")));
    }
    let n = weights.len() as u64;
    let mut best: Option<(f64, u64, Vec<u64>)> = None;
    for q in n..=max_denominator {
        let parts = apportion(weights, q);
        let err = parts
            .iter()
            .zip(weights)
            .map(|(&c, w)| (c as f64 / q as f64 - w).abs())
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(e, _, _)| err < e - 1e-12) {
            best = Some((err, q, parts));
        }
    }
    let Some((err, t_sq, c_sq)) = best else {
        return Err(CredenceError::ApproximationFailed(f64::INFINITY));
    };
    if err >= 1.0 / max_denominator as f64 {
        return Err(CredenceError::ApproximationFailed(err));
    }
    Ok(RationalWeights { c_sq, t_sq, approximation_error: err })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: for each q, try every composition by brute force.
    fn brute(weights: &[f64], max_q: u64) -> (u64, f64) {
        fn rec(weights: &[f64], q: u64, left: u64, k: usize, worst: f64, best: &mut f64) {
            if k + 1 == weights.len() {
                if left >= 1 {
                    let e = worst.max((left as f64 / q as f64 - weights[k]).abs());
                    *best = best.min(e);
                }
                return;
            }
            for c in 1..left {
                let e = worst.max((c as f64 / q as f64 - weights[k]).abs());
                if e < *best {
                    rec(weights, q, left - c, k + 1, e, best);
                }
            }
        }
        let mut out = (0, f64::INFINITY);
        for q in weights.len() as u64..=max_q {
            let mut b = f64::INFINITY;
            rec(weights, q, q, 0, 0.0, &mut b);
            if b < out.1 - 1e-12 {
                out = (q, b);
            }
        }
        out
    }

    #[test]
    fn thirds() {
        let rw = rationalize(&[2.0 / 3.0, 1.0 / 3.0], DEFAULT_MAX_DENOMINATOR).unwrap();
        assert_eq!((rw.c_sq.clone(), rw.t_sq), (vec![2, 1], 3));
        assert!(rw.approximation_error < 1e-15);
    }

    #[test]
    fn halves() {
        let rw = rationalize(&[0.5, 0.5], DEFAULT_MAX_DENOMINATOR).unwrap();
        assert_eq!((rw.c_sq, rw.t_sq), (vec![1, 1], 2));
    }

    #[test]
    fn sevenths_within_hundred() {
        let w = [0.285714, 0.714286];
        let rw = rationalize(&w, 100).unwrap();
        assert_eq!((rw.c_sq.clone(), rw.t_sq), (vec![2, 5], 7));
        let (q, e) = brute(&w, 100);
        assert_eq!(q, 7);
        assert!((e - rw.approximation_error).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_three_weights() {
        for w in [[0.2, 0.3, 0.5], [0.123, 0.456, 0.421], [0.01, 0.01, 0.98]] {
            let rw = rationalize(&w, 60).unwrap();
            let (q, e) = brute(&w, 60);
            assert_eq!(rw.t_sq, q, "{w:?}");
            assert!((rw.approximation_error - e).abs() < 1e-12);
        }
    }

    #[test]
    fn failure_and_input_errors() {
        assert!(matches!(rationalize(&[0.5, 0.3], 10), Err(CredenceError::InvalidInput(_))));
        assert!(matches!(rationalize(&[0.2, 0.3, 0.5], 2), Err(CredenceError::ApproximationFailed(_))));
    }
}
