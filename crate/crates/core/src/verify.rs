//! Seeded invariant suites. Trial `i` of a run with seed `s` uses seed `s + i`
//! and depends on nothing else, so a failing trial replays on its own.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branching::{measure, state_branches, Measurement};
use crate::credence::{
    born_credences, born_from_branches, compare_reduced, esp_invariance_check, refine_and_count, replay_proof,
    strong_esp, swap_closure, uniform_over_copies, CredenceTable, ObserverCopy, ProofCase, DEFAULT_MAX_DENOMINATOR,
};
use crate::qstate::{real, Space, StateVector, SubsystemLabel, C64};
use crate::random::{self, TrialRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "appendix-b")]
    ProductUnitary,
    #[serde(rename = "appendix-c")]
    Refinement,
    #[serde(rename = "proofs")]
    Proofs,
    #[serde(rename = "strong-esp")]
    StrongEsp,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::ProductUnitary, Suite::Refinement, Suite::Proofs, Suite::StrongEsp];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ProductUnitary => "appendix-b",
            Suite::Refinement => "appendix-c",
            Suite::Proofs => "proofs",
            Suite::StrongEsp => "strong-esp",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (expected one of appendix-b, appendix-c, proofs, strong-esp)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), deviation, tolerance }
    }

    pub fn pass(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub index: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialReport {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(Check::pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.deviation).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: Vec<TrialReport>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.trials.iter().all(TrialReport::pass)
    }

    pub fn first_failure(&self) -> Option<&TrialReport> {
        self.trials.iter().find(|t| !t.pass())
    }

    pub fn max_deviation(&self) -> f64 {
        self.trials.iter().map(TrialReport::max_deviation).fold(0.0, f64::max)
    }

    /// Per check name, the largest deviation over all trials.
    pub fn worst_by_check(&self) -> IndexMap<String, f64> {
        let mut out: IndexMap<String, f64> = IndexMap::new();
        for c in self.trials.iter().flat_map(|t| &t.checks) {
            let e = out.entry(c.name.clone()).or_insert(0.0);
            *e = e.max(c.deviation);
        }
        out
    }

    /// Command that replays the first failing trial alone.
    pub fn reproduce(&self) -> Option<String> {
        self.first_failure().map(|t| reproduce_command(self.suite, t.seed))
    }
}

pub fn reproduce_command(suite: Suite, seed: u64) -> String {
    format!("branchlab verify --suite {suite} --trials 1 --seed {seed}")
}

type Checks = Result<Vec<Check>, String>;

fn err(e: impl fmt::Display) -> String {
    e.to_string()
}

pub fn run_trial(suite: Suite, index: u64, seed: u64) -> TrialReport {
    let mut rng = random::rng(seed);
    let result = match suite {
        Suite::ProductUnitary => product_unitary_trial(&mut rng),
        Suite::Refinement => refinement_trial(&mut rng),
        Suite::Proofs => proofs(&mut rng),
        Suite::StrongEsp => strong_esp_suite(&mut rng),
    };
    match result {
        Ok(checks) => TrialReport { index, seed, checks, error: None },
        Err(e) => TrialReport { index, seed, checks: Vec::new(), error: Some(e) },
    }
}

/// Run `trials` trials in parallel; the report is in trial order.
pub fn run_suite(suite: Suite, trials: u64, seed: u64) -> SuiteReport {
    let trials = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(suite, i, seed.wrapping_add(i)))
        .collect();
    SuiteReport { suite, seed, trials }
}

fn named(name: &str, dim: usize) -> SubsystemLabel {
    SubsystemLabel::new(name, dim).expect("positive dimension")
}

/// Reduced dynamics under `U_A ⊗ U_E` equals `U_A` acting on the reduced state.
fn product_unitary_trial(rng: &mut TrialRng) -> Checks {
    let a = named("A", rng.random_range(2..=4));
    let e = named("E", rng.random_range(2..=4));
    let s = random::state(rng, Space::new(vec![a.clone(), e.clone()]).map_err(err)?);
    let u_a = random::unitary(rng, vec![a]);
    let u_e = random::unitary(rng, vec![e.clone()]);
    let rho = s.density().map_err(err)?;
    let rho_a = rho.partial_trace(&["A"]).map_err(err)?;

    let joint = u_a.tensor(&u_e).map_err(err)?;
    let lhs = rho.evolve(&joint).map_err(err)?.partial_trace(&["A"]).map_err(err)?;
    let rhs = rho_a.evolve(&u_a).map_err(err)?;
    let env_only = rho.evolve(&u_e).map_err(err)?.partial_trace(&["A"]).map_err(err)?;
    // The same through the state vector route.
    let via_state = s.apply_unitary(&joint).map_err(err)?.reduced(&["A"]).map_err(err)?;
    Ok(vec![
        Check::new("product evolution commutes with partial trace", lhs.max_abs_diff(&rhs).map_err(err)?, 1e-12),
        Check::new("environment unitary leaves reduced state", env_only.max_abs_diff(&rho_a).map_err(err)?, 1e-12),
        Check::new("state and density routes agree", via_state.max_abs_diff(&rhs).map_err(err)?, 1e-12),
    ])
}

/// `Σ_k c_k e^{iθ_k} |R⟩_A |d_k⟩_D |E_k⟩_E` with squared weights `c_sq / Σ c_sq`.
pub fn measured_state(c_sq: &[u64], phases: &[f64]) -> StateVector {
    let n = c_sq.len();
    let total: u64 = c_sq.iter().sum();
    let a = SubsystemLabel::with_kets("A", ["R"]).expect("label");
    let d = SubsystemLabel::with_kets("D", std::iter::once("R".to_string()).chain((1..=n).map(|k| format!("d{k}"))))
        .expect("label");
    let e = SubsystemLabel::with_kets("E", (1..=n).map(|k| format!("E{k}"))).expect("label");
    let space = Space::new(vec![a, d, e]).expect("space");
    StateVector::from_sparse(
        space,
        (0..n).map(|k| (vec![0, k + 1, k], C64::from_polar((c_sq[k] as f64 / total as f64).sqrt(), phases[k]))),
    )
    .expect("normalized")
}

fn random_branches(rng: &mut TrialRng, max_n: usize, max_total: u64) -> (Vec<u64>, Vec<f64>) {
    let n = rng.random_range(2..=max_n);
    let c_sq = random::rational_parts(rng, n, max_total);
    let phases = (0..n).map(|_| random::phase(rng)).collect();
    (c_sq, phases)
}

/// Counting after equal-amplitude refinement reproduces Born weights.
fn refinement_trial(rng: &mut TrialRng) -> Checks {
    let (c_sq, phases) = random_branches(rng, 6, 50);
    let s = measured_state(&c_sq, &phases);
    let out = refine_and_count(&s, "D", "E", DEFAULT_MAX_DENOMINATOR).map_err(err)?;
    let born = born_credences(&s.reduced(&["A", "D"]).map_err(err)?, &["D"], 1e-12).map_err(err)?;
    let total: u64 = c_sq.iter().sum();
    let exact = CredenceTable::from_weights(c_sq.iter().enumerate().map(|(k, &c)| (format!("d{}", k + 1), c as f64 / total as f64)))
        .map_err(err)?;
    Ok(vec![
        Check::new("count equals Born", out.table.max_abs_diff(&born), 1e-9),
        Check::new("count equals exact weights", out.table.max_abs_diff(&exact), 1e-9),
        Check::new("refinement keeps A+D", compare_reduced(&s, &out.refined, &["A", "D"]).map_err(err)?, 1e-12),
    ])
}

fn proof_check(case: ProofCase, expected: &CredenceTable) -> Checks {
    let id = case.id();
    let r = replay_proof(&case).map_err(err)?;
    let worst = r.premises.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let mut checks = vec![Check::new(format!("{id} premises"), worst, 1e-10)];
    match r.conclusion {
        Some(t) => checks.push(Check::new(format!("{id} conclusion"), t.max_abs_diff(expected), 1e-10)),
        None => {
            let why = r.first_failure().map(|p| format!("{}: {}", p.step, p.description)).unwrap_or_default();
            return Err(format!("{id} has no conclusion ({why})"));
        }
    }
    Ok(checks)
}

/// The two worked proofs, then the general one on random rational weights.
fn proofs(rng: &mut TrialRng) -> Checks {
    let mut checks = proof_check(ProofCase::HalfHalf, &CredenceTable::from_weights([("↑", 0.5), ("↓", 0.5)]).map_err(err)?)?;
    checks.extend(proof_check(
        ProofCase::OneThirdTwoThirds,
        &CredenceTable::from_weights([("↑", 2.0 / 3.0), ("↓", 1.0 / 3.0)]).map_err(err)?,
    )?);
    let (c_sq, phases) = random_branches(rng, 3, 12);
    let total: u64 = c_sq.iter().sum();
    let weights: Vec<f64> = c_sq.iter().map(|&c| c as f64 / total as f64).collect();
    let expected = CredenceTable::from_weights(weights.iter().enumerate().map(|(k, &w)| (format!("d{}", k + 1), w))).map_err(err)?;
    checks.extend(proof_check(ProofCase::General { weights, phases }, &expected)?);
    Ok(checks)
}

/// A measured spin whose environment also holds a spare factor `F`.
fn psi1_style(rng: &mut TrialRng) -> StateVector {
    let up: f64 = rng.random_range(0.05..0.95);
    let s = StateVector::product(vec![
        (SubsystemLabel::with_kets("A", ["R"]).expect("label"), vec![real(1.0)]),
        (SubsystemLabel::with_kets("D", ["R", "↑", "↓"]).expect("label"), vec![real(1.0), real(0.0), real(0.0)]),
        (
            SubsystemLabel::with_kets("a", ["↑", "↓"]).expect("label"),
            vec![C64::from_polar(up.sqrt(), random::phase(rng)), C64::from_polar((1.0 - up).sqrt(), random::phase(rng))],
        ),
        (named("E", 3), vec![real(1.0), real(0.0), real(0.0)]),
        (named("F", 2), vec![real(1.0), real(0.0)]),
    ])
    .expect("product state");
    measure(&s, &Measurement::new("a", "D", "E")).expect("measurement")
}

/// Born credences on a Ψ₁-style state are unchanged by a random unitary on
/// the environment.
pub fn env_unitary_check(seed: u64) -> Checks {
    let mut rng = random::rng(seed);
    let s = psi1_style(&mut rng);
    let u = random::unitary(&mut rng, vec![s.space().label("E").expect("E").clone(), named("F", 2)]);
    let r = esp_invariance_check(&s, &u, &["A", "D"], &["D"], 1e-12).map_err(err)?;
    Ok(vec![
        Check::new("Born credences under environment unitary", r.deviation, 1e-10),
        Check::new("A+D state under environment unitary", r.reduced_deviation, 1e-12),
    ])
}

fn strong_esp_suite(rng: &mut TrialRng) -> Checks {
    let mut checks = Vec::new();

    // Equal weights: the weighted rule is Indifference.
    let n = rng.random_range(1..=8);
    let w: f64 = rng.random_range(0.01..1.0);
    let copies: Vec<ObserverCopy> = (0..n).map(|i| ObserverCopy::new(format!("c{i}"), format!("b{i}"), 1, w)).collect();
    let d = strong_esp(&copies).map_err(err)?.max_abs_diff(&uniform_over_copies(&copies).map_err(err)?);
    checks.push(Check::new("equal weights reduce to Indifference", d, 1e-12));

    // One copy per branch: the weighted rule is Born.
    let (c_sq, phases) = random_branches(rng, 6, 60);
    let s = measured_state(&c_sq, &phases);
    let bs = state_branches(&s, &["D"], 1e-12).map_err(err)?;
    let copies: Vec<ObserverCopy> = bs.branches.iter().map(|b| ObserverCopy::new(b.label.clone(), b.label.clone(), 1, b.weight)).collect();
    let d = strong_esp(&copies).map_err(err)?.max_abs_diff(&born_from_branches(&bs).map_err(err)?);
    checks.push(Check::new("one copy per branch reduces to Born", d, 1e-10));

    // Rescaling every weight changes nothing.
    let weights: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.0..1.0)).collect();
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let plain: Vec<ObserverCopy> = weights.iter().enumerate().map(|(i, &w)| ObserverCopy::new(format!("c{i}"), "b", 1, w + 1e-3)).collect();
    let scaled: Vec<ObserverCopy> = plain.iter().map(|c| ObserverCopy::new(&c.id, &c.branch, c.time, c.weight * scale)).collect();
    let d = strong_esp(&plain).map_err(err)?.max_abs_diff(&strong_esp(&scaled).map_err(err)?);
    checks.push(Check::new("scale invariance", d, 1e-12));

    // Branch phases do not move Born credences.
    let flat = measured_state(&c_sq, &vec![0.0; c_sq.len()]);
    let with = born_credences(&s.reduced(&["A", "D"]).map_err(err)?, &["D"], 1e-12).map_err(err)?;
    let without = born_credences(&flat.reduced(&["A", "D"]).map_err(err)?, &["D"], 1e-12).map_err(err)?;
    checks.push(Check::new("phase invariance", with.max_abs_diff(&without), 1e-12));

    // Equal-amplitude branches close into one swap class, uniformly weighted.
    let n = rng.random_range(2..=5);
    let phases: Vec<f64> = (0..n).map(|_| random::phase(rng)).collect();
    let eq = measured_state(&vec![1; n], &phases);
    let (classes, table) = swap_closure(&eq, &["D"], &["E"]).map_err(err)?;
    let d = match table {
        Some(t) if classes.len() == 1 => t.iter().map(|(_, p)| (p - 1.0 / n as f64).abs()).fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    checks.push(Check::new("swap closure is uniform", d, 1e-12));

    checks.extend(env_unitary_check(rng.random())?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("appendix-d".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes_a_few_trials() {
        for s in Suite::ALL {
            let r = run_suite(s, 3, 11);
            assert!(r.pass(), "{s}: {:?}", r.first_failure());
            assert_eq!(r.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![11, 12, 13]);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(run_suite(Suite::Refinement, 4, 0), run_suite(Suite::Refinement, 4, 0));
    }

    #[test]
    fn trial_replays_alone() {
        let all = run_suite(Suite::StrongEsp, 3, 5);
        assert_eq!(run_trial(Suite::StrongEsp, 2, 7), all.trials[2]);
    }

    #[test]
    fn failure_names_reproduction() {
        let r = SuiteReport {
            suite: Suite::Proofs,
            seed: 3,
            trials: vec![TrialReport { index: 1, seed: 4, checks: vec![Check::new("x", 1.0, 0.0)], error: None }],
        };
        assert_eq!(r.reproduce().unwrap(), "branchlab verify --suite proofs --trials 1 --seed 4");
    }
}
