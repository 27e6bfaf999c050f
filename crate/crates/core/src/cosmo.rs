//! Observer measure for branch families: `∫ |α(t)|² n(t) dt`.

use std::io::Write;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credence::CredenceTable;

/// Target absolute error of the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-8;
const MAX_DEPTH: u32 = 48;
/// Default truncation horizon leaves an exponential tail below this.
const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CosmoError {
    #[error("negative observer density {0}")]
    InvalidDensity(f64),
    #[error("invalid history `{name}`: {message}")]
    InvalidHistory { name: String, message: String },
    #[error("every family has zero measure")]
    NoSupport,
    #[error("no families given")]
    NoFamilies,
    #[error("`{0}` has an infinite measure")]
    Divergent(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CosmoError>;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Form {
    /// `|α(t)| = A e^{−γt}`, `n(t) = n0 e^{ωt}`.
    Exponential {
        #[serde(rename = "A")]
        a: f64,
        gamma: f64,
        omega: f64,
        #[serde(default = "one")]
        n0: f64,
    },
    /// Samples, linearly interpolated between the `ts`.
    Tabulated { ts: Vec<f64>, alphas: Vec<f64>, ns: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchHistory {
    pub name: String,
    pub form: Form,
    #[serde(default)]
    pub t0: f64,
    /// Upper limit; absent means infinity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoSpec {
    pub families: Vec<BranchHistory>,
}

impl CosmoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(CosmoError::NoFamilies);
        }
        self.families.iter().try_for_each(BranchHistory::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureValue {
    Finite(f64),
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub value: MeasureValue,
    pub method: Method,
    pub error_estimate: f64,
}

impl MeasureResult {
    pub fn finite(&self) -> Option<f64> {
        match self.value {
            MeasureValue::Finite(v) => Some(v),
            MeasureValue::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.value == MeasureValue::Divergent
    }
}

impl BranchHistory {
    pub fn exponential(name: impl Into<String>, a: f64, gamma: f64, omega: f64) -> Self {
        Self { name: name.into(), form: Form::Exponential { a, gamma, omega, n0: 1.0 }, t0: 0.0, t1: None }
    }

    pub fn tabulated(name: impl Into<String>, ts: Vec<f64>, alphas: Vec<f64>, ns: Vec<f64>) -> Self {
        let t0 = ts.first().copied().unwrap_or(0.0);
        let t1 = ts.last().copied();
        Self { name: name.into(), form: Form::Tabulated { ts, alphas, ns }, t0, t1 }
    }

    fn invalid(&self, message: impl Into<String>) -> CosmoError {
        CosmoError::InvalidHistory { name: self.name.clone(), message: message.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() {
            return Err(self.invalid("t0 must be finite"));
        }
        if let Some(t1) = self.t1 {
            if !(t1 >= self.t0) {
                return Err(self.invalid(format!("t1 = {t1} precedes t0 = {}", self.t0)));
            }
        }
        match &self.form {
            Form::Exponential { a, gamma, omega, n0 } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(self.invalid("A must be positive"));
                }
                if !gamma.is_finite() || !omega.is_finite() {
                    return Err(self.invalid("γ and ω must be finite"));
                }
                if !n0.is_finite() || *n0 < 0.0 {
                    return Err(CosmoError::InvalidDensity(*n0));
                }
            }
            Form::Tabulated { ts, alphas, ns } => {
                if ts.len() < 2 || alphas.len() != ts.len() || ns.len() != ts.len() {
                    return Err(self.invalid("need at least two samples and equal-length ts, alphas, ns"));
                }
                if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
                    return Err(self.invalid("ts must be finite and strictly increasing"));
                }
                if let Some(&n) = ns.iter().find(|n| !(**n >= 0.0) || !n.is_finite()) {
                    return Err(CosmoError::InvalidDensity(n));
                }
                if alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                    return Err(self.invalid("amplitude samples must be non-negative"));
                }
                if self.t0 < ts[0] {
                    return Err(self.invalid("t0 lies before the first sample"));
                }
            }
        }
        Ok(())
    }

    /// `|α(t)|² n(t)`.
    pub fn integrand(&self, t: f64) -> f64 {
        match &self.form {
            Form::Exponential { a, gamma, omega, n0 } => a * a * n0 * ((omega - 2.0 * gamma) * t).exp(),
            Form::Tabulated { ts, alphas, ns } => {
                let (a, n) = (interp(ts, alphas, t), interp(ts, ns, t));
                a * a * n
            }
        }
    }

    /// Upper end of the sampled or default integration range.
    pub fn horizon(&self) -> f64 {
        match (&self.form, self.t1) {
            (_, Some(t1)) => t1,
            (Form::Tabulated { ts, .. }, None) => *ts.last().expect("validated"),
            (Form::Exponential { a, gamma, omega, n0 }, None) => {
                let k = 2.0 * gamma - omega;
                let c = a * a * n0;
                if k <= 0.0 || c == 0.0 {
                    return self.t0 + 50.0;
                }
                // Tail c e^{−kH}/k below TAIL_TOL.
                let h = self.t0 + ((c / (k * TAIL_TOL)).ln() / k).max(1.0);
                h.max(self.t0 + 1.0)
            }
        }
    }
}

/// Linear interpolation, clamped to the end samples.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let f = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + f * (ys[i + 1] - ys[i])
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

struct Simpson<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    error: f64,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn refine(&mut self, a: f64, fa: f64, m: f64, fm: f64, b: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = ((self.f)(lm), (self.f)(rm));
        let left = simpson(a, fa, flm, m, fm);
        let right = simpson(m, fm, frm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-12 {
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.refine(a, fa, lm, flm, m, fm, left, tol / 2.0, depth - 1)
            + self.refine(m, fm, rm, frm, b, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson on `[a, b]`; returns the integral and an error estimate
/// (sum of `|S₂ − S₁|/15` over accepted panels).
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    // Start from a few panels so narrow features are not skipped.
    const PANELS: usize = 16;
    let mut s = Simpson { f: &f, error: 0.0 };
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let (x0, x1) = (a + k as f64 * h, if k + 1 == PANELS { b } else { a + (k + 1) as f64 * h });
        let xm = (x0 + x1) / 2.0;
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = simpson(x0, f0, fm, x1, f1);
        total += s.refine(x0, f0, xm, fm, x1, f1, whole, tol / PANELS as f64, MAX_DEPTH);
    }
    (total, s.error)
}

/// Closed form for exponential histories, quadrature with a tail estimate
/// for tabulated ones.
pub fn branch_measure(h: &BranchHistory) -> Result<MeasureResult> {
    h.validate()?;
    match &h.form {
        Form::Exponential { a, gamma, omega, n0 } => {
            let c = a * a * n0;
            let k = 2.0 * gamma - omega;
            let closed = |value| Ok(MeasureResult { value, method: Method::ClosedForm, error_estimate: 0.0 });
            if c == 0.0 {
                return closed(MeasureValue::Finite(0.0));
            }
            match h.t1 {
                None if k <= 0.0 => closed(MeasureValue::Divergent),
                None => closed(MeasureValue::Finite(c * (-k * h.t0).exp() / k)),
                Some(t1) if k.abs() < 1e-300 => closed(MeasureValue::Finite(c * (t1 - h.t0))),
                Some(t1) => closed(MeasureValue::Finite(c * ((-k * h.t0).exp() - (-k * t1).exp()) / k)),
            }
        }
        Form::Tabulated { ts, .. } => {
            let last = *ts.last().expect("validated");
            let end = h.t1.map_or(last, |t1| t1.min(last));
            // Piecewise between samples, so kinks fall on panel edges.
            let mut value = 0.0;
            let mut error = 0.0;
            let mut knots: Vec<f64> = std::iter::once(h.t0).chain(ts.iter().copied().filter(|&t| t > h.t0 && t < end)).collect();
            knots.push(end);
            let share = QUAD_TOL / knots.len() as f64;
            for w in knots.windows(2) {
                let (v, e) = adaptive_simpson(|t| h.integrand(t), w[0], w[1], share);
                value += v;
                error += e;
            }
            let beyond = h.t1.is_none_or(|t1| t1 > last);
            if beyond {
                match tail_estimate(h, h.t1) {
                    Some(tail) => value += tail,
                    None => return Ok(MeasureResult { value: MeasureValue::Divergent, method: Method::Quadrature, error_estimate: error }),
                }
            }
            Ok(MeasureResult { value: MeasureValue::Finite(value), method: Method::Quadrature, error_estimate: error })
        }
    }
}

/// Integral past the last sample, extrapolating the last two integrand
/// samples exponentially. `None` when the extrapolation does not decay and
/// the range is infinite.
fn tail_estimate(h: &BranchHistory, t1: Option<f64>) -> Option<f64> {
    let Form::Tabulated { ts, .. } = &h.form else { return Some(0.0) };
    let n = ts.len();
    let (ta, tb) = (ts[n - 2], ts[n - 1]);
    let (fa, fb) = (h.integrand(ta), h.integrand(tb));
    if fb == 0.0 {
        return Some(0.0);
    }
    let rate = if fa > 0.0 { (fb / fa).ln() / (tb - ta) } else { f64::INFINITY };
    match t1 {
        None if rate >= 0.0 => None,
        None => Some(fb / -rate),
        Some(t1) if rate.abs() < 1e-300 || !rate.is_finite() => Some(if rate.is_finite() { fb * (t1 - tb) } else { f64::INFINITY }),
        Some(t1) => Some(fb * ((rate * (t1 - tb)).exp() - 1.0) / rate),
    }
}

/// Integrate an exponential history numerically up to `horizon` (default:
/// where the analytic tail drops below 1e-10). The error estimate includes
/// the analytic tail beyond the horizon.
pub fn quadrature_measure(h: &BranchHistory, horizon: Option<f64>) -> Result<MeasureResult> {
    h.validate()?;
    let end = horizon.unwrap_or_else(|| h.horizon());
    if let Some(t1) = h.t1 {
        if end > t1 {
            return Err(h.invalid("horizon lies past t1"));
        }
    }
    let (value, mut error) = adaptive_simpson(|t| h.integrand(t), h.t0, end, QUAD_TOL);
    if let Form::Exponential { a, gamma, omega, n0 } = &h.form {
        let k = 2.0 * gamma - omega;
        let c = a * a * n0;
        let remaining_to = h.t1;
        if c > 0.0 {
            match remaining_to {
                None if k <= 0.0 => {
                    return Ok(MeasureResult { value: MeasureValue::Divergent, method: Method::Quadrature, error_estimate: error })
                }
                None => error += c * (-k * end).exp() / k,
                Some(t1) => error += h.integrand(end).max(h.integrand(t1)) * (t1 - end),
            }
        }
    }
    Ok(MeasureResult { value: MeasureValue::Finite(value), method: Method::Quadrature, error_estimate: error })
}

/// Per-family measures and, if all are finite, their normalized table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub measures: IndexMap<String, MeasureResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<CredenceTable>,
    /// Families with an infinite measure.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub divergent: Vec<String>,
}

/// Measure each family (in parallel) and normalize across them.
pub fn normalize_families(hs: &[BranchHistory]) -> Result<FamilyReport> {
    if hs.is_empty() {
        return Err(CosmoError::NoFamilies);
    }
    let results: Vec<MeasureResult> = hs.par_iter().map(branch_measure).collect::<Result<_>>()?;
    let measures: IndexMap<String, MeasureResult> = hs.iter().map(|h| h.name.clone()).zip(results).collect();
    if measures.len() != hs.len() {
        return Err(CosmoError::InvalidHistory { name: "families".into(), message: "repeated family name".into() });
    }
    let divergent: Vec<String> = measures.iter().filter(|(_, m)| m.is_divergent()).map(|(n, _)| n.clone()).collect();
    if !divergent.is_empty() {
        return Ok(FamilyReport { measures, table: None, divergent });
    }
    let total: f64 = measures.values().filter_map(MeasureResult::finite).sum();
    if !(total > 0.0) {
        return Err(CosmoError::NoSupport);
    }
    let entries = measures.iter().map(|(n, m)| (n.clone(), m.finite().expect("finite") / total)).collect();
    Ok(FamilyReport { measures, table: Some(CredenceTable { entries }), divergent })
}

/// `samples` evenly spaced points of the integrand over `[t0, horizon]`.
pub fn integrand_samples(h: &BranchHistory, samples: usize) -> Vec<(f64, f64)> {
    let end = h.horizon();
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let t = h.t0 + (end - h.t0) * i as f64 / (n - 1) as f64;
            (t, h.integrand(t))
        })
        .collect()
}

/// CSV with columns `family,t,integrand`.
pub fn write_samples_csv(w: &mut impl Write, hs: &[BranchHistory], samples: usize) -> Result<()> {
    let io = |e: std::io::Error| CosmoError::Io(e.to_string());
    writeln!(w, "family,t,integrand").map_err(io)?;
    for h in hs {
        for (t, f) in integrand_samples(h, samples) {
            writeln!(w, "{},{t},{f}", h.name).map_err(io)?;
        }
    }
    Ok(())
}
