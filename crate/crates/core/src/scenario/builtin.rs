use super::{parse_scenario, Result, Scenario, ScenarioError};

const CORPUS: &[(&str, &str)] = &[
    ("once", include_str!("../../scenarios/once.json")),
    ("once_or_twice", include_str!("../../scenarios/once_or_twice.json")),
    ("two_branch_beauty", include_str!("../../scenarios/two_branch_beauty.json")),
    ("three_branch_beauty", include_str!("../../scenarios/three_branch_beauty.json")),
    ("dr_evil", include_str!("../../scenarios/dr_evil.json")),
    ("what_wave_function", include_str!("../../scenarios/what_wave_function.json")),
    ("appendix_a_book", include_str!("../../scenarios/appendix_a_book.json")),
    ("dr_evil_book", include_str!("../../scenarios/dr_evil_book.json")),
    ("cosmo_convergent", include_str!("../../scenarios/cosmo_convergent.json")),
    ("cosmo_divergent", include_str!("../../scenarios/cosmo_divergent.json")),
    ("cosmo_families", include_str!("../../scenarios/cosmo_families.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    CORPUS.iter().map(|(n, _)| *n)
}

/// A bundled scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = CORPUS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
    parse_scenario(text)
}
