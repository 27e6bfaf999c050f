//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! A [`Space`] is an ordered list of [`SubsystemLabel`]s. Joint basis indices
//! are row-major over that order: the first label varies slowest. Branch
//! labels downstream are built from these indices, so the convention is fixed.
//!
//! Everything here is a value type. Operations return new states or operators
//! and never mutate their inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for numeric equality checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest joint dimension a state may have.
pub const MAX_JOINT_DIM: usize = 1 << 14;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QStateError {
    #[error("subsystem label `{0}` appears more than once")]
    LabelCollision(String),
    #[error("subsystem label `{0}` is not part of this space")]
    LabelMissing(String),
    #[error("invalid subsystem label: {0}")]
    InvalidLabel(String),
    #[error("operator is not unitary (max |U^dag U - I| = {0:e})")]
    NotUnitary(f64),
    #[error("partial trace needs at least one subsystem to keep")]
    EmptyKeepSet,
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("joint dimension {0} exceeds the cap of {MAX_JOINT_DIM}")]
    TooLarge(usize),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("operator trace is {0}, expected 1")]
    InvalidTrace(f64),
    #[error("operator has a negative eigenvalue {0:e}")]
    NotPositive(f64),
}

pub type Result<T> = std::result::Result<T, QStateError>;

/// A named finite-dimensional tensor factor.
///
/// `kets` names each basis state (e.g. `R`, `↑`, `↓`); they default to the
/// decimal index and are used only for display and record lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemLabel {
    pub name: String,
    pub dim: usize,
    pub kets: Vec<String>,
}

impl SubsystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(QStateError::InvalidLabel("empty name".into()));
        }
        if dim == 0 {
            return Err(QStateError::InvalidLabel(format!("`{name}` has dimension 0")));
        }
        let kets = (0..dim).map(|i| i.to_string()).collect();
        Ok(Self { name, dim, kets })
    }

    /// Label whose basis states carry the given names; `dim = kets.len()`.
    pub fn with_kets<S: Into<String>>(name: impl Into<String>, kets: impl IntoIterator<Item = S>) -> Result<Self> {
        let kets: Vec<String> = kets.into_iter().map(Into::into).collect();
        let mut label = Self::new(name, kets.len())?;
        label.kets = kets;
        Ok(label)
    }

    pub fn ket(&self, index: usize) -> &str {
        &self.kets[index]
    }

    pub fn ket_index(&self, ket: &str) -> Option<usize> {
        self.kets.iter().position(|k| k == ket)
    }

    /// Same name and dimension; ket names are ignored.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.name == other.name && self.dim == other.dim
    }
}

/// Ordered sequence of subsystems with unique names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Space(Vec<SubsystemLabel>);

impl Space {
    pub fn new(labels: Vec<SubsystemLabel>) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|m| m.name == l.name) {
                return Err(QStateError::LabelCollision(l.name.clone()));
            }
        }
        let space = Self(labels);
        let dim = space.checked_dim().ok_or(QStateError::TooLarge(usize::MAX))?;
        if dim > MAX_JOINT_DIM {
            return Err(QStateError::TooLarge(dim));
        }
        Ok(space)
    }

    fn checked_dim(&self) -> Option<usize> {
        self.0.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.dim))
    }

    pub fn labels(&self) -> &[SubsystemLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|l| l.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.0.iter().map(|l| l.dim).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|l| l.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.position(name).ok_or_else(|| QStateError::LabelMissing(name.to_string()))
    }

    pub fn label(&self, name: &str) -> Option<&SubsystemLabel> {
        self.0.iter().find(|l| l.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|l| l.name.as_str())
    }

    /// Row-major strides, last factor fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1].dim;
        }
        strides
    }

    /// Per-factor coordinates of a joint index.
    pub fn split(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.0.len()];
        for k in (0..self.0.len()).rev() {
            coords[k] = index % self.0[k].dim;
            index /= self.0[k].dim;
        }
        coords
    }

    pub fn join(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.0).fold(0, |acc, (&c, l)| acc * l.dim + c)
    }

    /// Names and dimensions agree position by position.
    pub fn same_shape(&self, other: &Space) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.same_shape(b))
    }

    /// Replace a label in place (same name and dimension, new ket names).
    pub fn relabel(&self, label: SubsystemLabel) -> Result<Space> {
        let pos = self.require(&label.name)?;
        if self.0[pos].dim != label.dim {
            return Err(QStateError::DimensionMismatch { expected: self.0[pos].dim, got: label.dim });
        }
        let mut labels = self.0.clone();
        labels[pos] = label;
        Ok(Space(labels))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let p = self.require(n)?;
            if out.contains(&p) {
                return Err(QStateError::LabelCollision(n.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Joint-index offsets of the sub-basis spanned by `positions` (in the
    /// given order, row-major), holding every other coordinate at zero.
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &p in positions {
            let d = self.0[p].dim;
            let mut next = Vec::with_capacity(offsets.len() * d);
            for &o in &offsets {
                for c in 0..d {
                    next.push(o + c * strides[p]);
                }
            }
            offsets = next;
        }
        offsets
    }

    fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.0.len()).filter(|p| !positions.contains(p)).collect()
    }
}

/// Pure state over a labeled space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    space: Space,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(space: Space, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(QStateError::DimensionMismatch { expected: space.dim(), got: amps.len() });
        }
        Ok(Self { space, amps })
    }

    /// Single-factor state with the given amplitudes.
    pub fn single(label: SubsystemLabel, amps: Vec<C64>) -> Result<Self> {
        Self::new(Space::new(vec![label])?, amps)
    }

    /// Computational basis state `|coords⟩`.
    pub fn basis(space: Space, coords: &[usize]) -> Result<Self> {
        if coords.len() != space.len() {
            return Err(QStateError::DimensionMismatch { expected: space.len(), got: coords.len() });
        }
        for (c, l) in coords.iter().zip(space.labels()) {
            if *c >= l.dim {
                return Err(QStateError::DimensionMismatch { expected: l.dim, got: *c + 1 });
            }
        }
        let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
        amps[space.join(coords)] = C64::new(1.0, 0.0);
        Ok(Self { space, amps })
    }

    /// Product of single-factor states, in order.
    pub fn product(factors: Vec<(SubsystemLabel, Vec<C64>)>) -> Result<Self> {
        let mut iter = factors.into_iter();
        let Some((l, a)) = iter.next() else {
            return Err(QStateError::InvalidLabel("product of zero factors".into()));
        };
        let mut state = Self::single(l, a)?;
        for (l, a) in iter {
            state = tensor(&state, &Self::single(l, a)?)?;
        }
        Ok(state)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, coords: &[usize]) -> C64 {
        self.amps[self.space.join(coords)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(QStateError::NotNormalized(n * n));
        }
        Ok(Self { space: self.space.clone(), amps: self.amps.iter().map(|a| a / n).collect() })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Replace the ket names of one factor.
    pub fn relabel(&self, label: SubsystemLabel) -> Result<Self> {
        Ok(Self { space: self.space.relabel(label)?, amps: self.amps.clone() })
    }

    /// Basis states with non-negligible amplitude, as (coords, amplitude).
    pub fn support(&self, tol: f64) -> Vec<(Vec<usize>, C64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > tol * tol)
            .map(|(i, a)| (self.space.split(i), *a))
            .collect()
    }

    /// Build a new state over `space` from a sparse list of amplitudes; repeated
    /// coordinates accumulate.
    pub fn from_sparse(space: Space, entries: impl IntoIterator<Item = (Vec<usize>, C64)>) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
        for (coords, a) in entries {
            if coords.len() != space.len() {
                return Err(QStateError::DimensionMismatch { expected: space.len(), got: coords.len() });
            }
            amps[space.join(&coords)] += a;
        }
        Ok(Self { space, amps })
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if !self.space.same_shape(&other.space) {
            return Err(QStateError::DimensionMismatch { expected: self.space.dim(), got: other.space.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        if !self.space.same_shape(&other.space) {
            return Err(QStateError::DimensionMismatch { expected: self.space.dim(), got: other.space.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Multiply every amplitude whose coordinates satisfy `pred` by `phase`.
    pub fn map_phase(&self, phase: C64, pred: impl Fn(&[usize]) -> bool) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if pred(&self.space.split(i)) { a * phase } else { *a })
            .collect();
        Self { space: self.space.clone(), amps }
    }

    pub fn apply_unitary(&self, u: &UnitaryOp) -> Result<Self> {
        apply_unitary(self, u)
    }

    pub fn density(&self) -> Result<DensityOperator> {
        density_of(self)
    }

    /// Reduced density operator on `keep`, computed directly from the
    /// amplitudes without forming the full projector.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(QStateError::EmptyKeepSet);
        }
        let mut keep_pos = self.space.positions(keep)?;
        keep_pos.sort_unstable();
        let traced = self.space.complement(&keep_pos);
        let keep_off = self.space.offsets(&keep_pos);
        let trace_off = self.space.offsets(&traced);
        let m = DMatrix::from_fn(keep_off.len(), trace_off.len(), |a, t| self.amps[keep_off[a] + trace_off[t]]);
        let rho = &m * m.adjoint();
        let space = Space(keep_pos.iter().map(|&p| self.space.0[p].clone()).collect());
        Ok(DensityOperator { space, mat: hermitize(rho) })
    }
}

/// Tensor product `a ⊗ b`; the joint space is `a.space` followed by `b.space`.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let mut labels = a.space.0.clone();
    labels.extend(b.space.0.iter().cloned());
    let space = Space::new(labels)?;
    let mut amps = Vec::with_capacity(a.amps.len() * b.amps.len());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    Ok(StateVector { space, amps })
}

/// Square operator acting on an ordered subset of subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOp {
    targets: Vec<SubsystemLabel>,
    mat: DMatrix<C64>,
}

impl UnitaryOp {
    pub fn new(targets: Vec<SubsystemLabel>, mat: DMatrix<C64>) -> Result<Self> {
        Self::with_tol(targets, mat, DEFAULT_TOL)
    }

    pub fn with_tol(targets: Vec<SubsystemLabel>, mat: DMatrix<C64>, tol: f64) -> Result<Self> {
        Space::new(targets.clone())?;
        let dim: usize = targets.iter().map(|l| l.dim).product();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(QStateError::DimensionMismatch { expected: dim, got: mat.nrows() });
        }
        let dev = unitarity_deviation(&mat);
        if dev > tol {
            return Err(QStateError::NotUnitary(dev));
        }
        Ok(Self { targets, mat })
    }

    pub fn identity(targets: Vec<SubsystemLabel>) -> Result<Self> {
        let dim: usize = targets.iter().map(|l| l.dim).product();
        Self::new(targets, DMatrix::identity(dim, dim))
    }

    /// Permutation unitary sending basis state `i` to `image[i]`.
    pub fn permutation(targets: Vec<SubsystemLabel>, image: &[usize]) -> Result<Self> {
        let dim: usize = targets.iter().map(|l| l.dim).product();
        if image.len() != dim {
            return Err(QStateError::DimensionMismatch { expected: dim, got: image.len() });
        }
        let mut mat = DMatrix::zeros(dim, dim);
        for (i, &j) in image.iter().enumerate() {
            if j >= dim {
                return Err(QStateError::DimensionMismatch { expected: dim, got: j + 1 });
            }
            mat[(j, i)] = C64::new(1.0, 0.0);
        }
        Self::new(targets, mat)
    }

    pub fn targets(&self) -> &[SubsystemLabel] {
        &self.targets
    }

    pub fn target_names(&self) -> Vec<&str> {
        self.targets.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { targets: self.targets.clone(), mat: self.mat.adjoint() }
    }

    /// `self ⊗ other` on the concatenated (disjoint) targets.
    pub fn tensor(&self, other: &UnitaryOp) -> Result<Self> {
        let mut targets = self.targets.clone();
        targets.extend(other.targets.iter().cloned());
        Space::new(targets.clone())?;
        Ok(Self { targets, mat: self.mat.kronecker(&other.mat) })
    }
}

fn unitarity_deviation(mat: &DMatrix<C64>) -> f64 {
    let prod = mat.adjoint() * mat;
    let n = prod.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((prod[(i, j)] - target).norm());
        }
    }
    dev
}

/// Resolve `u`'s targets inside `space`, checking dimensions.
fn target_positions(space: &Space, u: &UnitaryOp) -> Result<Vec<usize>> {
    let mut positions = Vec::with_capacity(u.targets.len());
    for t in &u.targets {
        let p = space.require(&t.name)?;
        if space.0[p].dim != t.dim {
            return Err(QStateError::DimensionMismatch { expected: space.0[p].dim, got: t.dim });
        }
        positions.push(p);
    }
    Ok(positions)
}

/// Apply `op` (over the joint basis of `positions`, in that order) to a
/// vector over `space` in place.
fn apply_local(space: &Space, positions: &[usize], op: &DMatrix<C64>, vec: &mut [C64]) {
    let target_off = space.offsets(positions);
    let rest = space.complement(positions);
    let rest_off = space.offsets(&rest);
    let mut buf = vec![C64::new(0.0, 0.0); target_off.len()];
    for &base in &rest_off {
        for (t, &o) in target_off.iter().enumerate() {
            buf[t] = vec[base + o];
        }
        for (r, &o) in target_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, b) in buf.iter().enumerate() {
                acc += op[(r, c)] * b;
            }
            vec[base + o] = acc;
        }
    }
}

/// Evolve `s` by `u`, leaving non-target factors untouched.
pub fn apply_unitary(s: &StateVector, u: &UnitaryOp) -> Result<StateVector> {
    let positions = target_positions(&s.space, u)?;
    let mut amps = s.amps.clone();
    apply_local(&s.space, &positions, &u.mat, &mut amps);
    Ok(StateVector { space: s.space.clone(), amps })
}

/// Mixed (or pure) state over a labeled space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    space: Space,
    mat: DMatrix<C64>,
}

impl DensityOperator {
    /// Validating constructor: Hermitian, unit trace, positive semidefinite.
    pub fn from_matrix(space: Space, mat: DMatrix<C64>) -> Result<Self> {
        let dim = space.dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(QStateError::DimensionMismatch { expected: dim, got: mat.nrows() });
        }
        let rho = Self { space, mat };
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_deviation();
        if h > HERMITIAN_TOL {
            return Err(QStateError::NotHermitian(h));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(QStateError::InvalidTrace(tr));
        }
        let ev = self.min_eigenvalue();
        if ev < -PSD_TOL {
            return Err(QStateError::NotPositive(ev));
        }
        Ok(())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, row: &[usize], col: &[usize]) -> C64 {
        self.mat[(self.space.join(row), self.space.join(col))]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = hermitize(self.mat.clone());
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitize(self.mat.clone()).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        partial_trace(self, keep)
    }

    /// `u ρ u†`, with `u` embedded on its targets.
    pub fn evolve(&self, u: &UnitaryOp) -> Result<Self> {
        let positions = target_positions(&self.space, u)?;
        let n = self.dim();
        let mut left = self.mat.clone();
        for c in 0..n {
            let mut col: Vec<C64> = left.column(c).iter().copied().collect();
            apply_local(&self.space, &positions, &u.mat, &mut col);
            left.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        // (U (U ρ)†)† = U ρ U†
        let mut right = left.adjoint();
        for c in 0..n {
            let mut col: Vec<C64> = right.column(c).iter().copied().collect();
            apply_local(&self.space, &positions, &u.mat, &mut col);
            right.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        Ok(Self { space: self.space.clone(), mat: hermitize(right.adjoint()) })
    }

    /// Largest entrywise modulus of `self − other`; spaces must match in
    /// name and dimension.
    pub fn max_abs_diff(&self, other: &DensityOperator) -> Result<f64> {
        if !self.space.same_shape(&other.space) {
            return Err(QStateError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok((&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj).map(|z| z * 0.5)
}

/// `|s⟩⟨s|` for a normalized state.
pub fn density_of(s: &StateVector) -> Result<DensityOperator> {
    let n2 = s.norm_sqr();
    if (n2 - 1.0).abs() > 1e-8 {
        return Err(QStateError::NotNormalized(n2));
    }
    let v = nalgebra::DVector::from_column_slice(&s.amps);
    let mat = &v * v.adjoint();
    Ok(DensityOperator { space: s.space.clone(), mat })
}

/// Trace out every factor not named in `keep`. The result keeps the factors
/// in their original order and is symmetrized to wash out rounding.
pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(QStateError::EmptyKeepSet);
    }
    let mut keep_pos = rho.space.positions(keep)?;
    keep_pos.sort_unstable();
    let traced = rho.space.complement(&keep_pos);
    let keep_off = rho.space.offsets(&keep_pos);
    let trace_off = rho.space.offsets(&traced);
    let kd = keep_off.len();
    let mut out = DMatrix::zeros(kd, kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &trace_off {
                acc += rho.mat[(keep_off[i] + t, keep_off[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    let space = Space(keep_pos.iter().map(|&p| rho.space.0[p].clone()).collect());
    Ok(DensityOperator { space, mat: hermitize(out) })
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn qubit(name: &str) -> SubsystemLabel {
        SubsystemLabel::new(name, 2).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let zero = StateVector::single(qubit("a"), vec![real(1.0), real(0.0)]).unwrap();
        let one = StateVector::single(qubit("b"), vec![real(0.0), real(1.0)]).unwrap();
        let joint = tensor(&zero, &one).unwrap();
        assert_eq!(joint.space().dim(), 4);
        assert_eq!(joint.amps()[1], real(1.0));
        assert_eq!(joint.norm_sqr(), 1.0);
    }

    #[test]
    fn tensor_distributes() {
        let plus = StateVector::single(qubit("a"), vec![real(FRAC_1_SQRT_2); 2]).unwrap();
        let zero = StateVector::single(qubit("b"), vec![real(1.0), real(0.0)]).unwrap();
        let joint = tensor(&plus, &zero).unwrap();
        let expect = [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0];
        for (a, e) in joint.amps().iter().zip(expect) {
            assert!((a - real(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_rejects_shared_labels() {
        let a = StateVector::single(qubit("a"), vec![real(1.0), real(0.0)]).unwrap();
        assert_eq!(tensor(&a, &a).unwrap_err(), QStateError::LabelCollision("a".into()));
    }

    #[test]
    fn identity_leaves_state() {
        let s = StateVector::product(vec![
            (qubit("a"), vec![real(0.6), c(0.0, 0.8)]),
            (qubit("b"), vec![real(FRAC_1_SQRT_2), real(-FRAC_1_SQRT_2)]),
        ])
        .unwrap();
        let u = UnitaryOp::identity(vec![qubit("b")]).unwrap();
        assert_eq!(apply_unitary(&s, &u).unwrap(), s);
    }

    #[test]
    fn unitary_errors() {
        let s = StateVector::single(qubit("a"), vec![real(1.0), real(0.0)]).unwrap();
        let u = UnitaryOp::identity(vec![qubit("z")]).unwrap();
        assert_eq!(apply_unitary(&s, &u).unwrap_err(), QStateError::LabelMissing("z".into()));
        let m = DMatrix::from_element(2, 2, real(1.0));
        assert!(matches!(UnitaryOp::new(vec![qubit("a")], m), Err(QStateError::NotUnitary(_))));
    }

    #[test]
    fn unitary_on_second_factor_in_target_order() {
        // CNOT with control b, target a; targets listed as (b, a).
        let s = StateVector::basis(Space::new(vec![qubit("a"), qubit("b")]).unwrap(), &[0, 1]).unwrap();
        let cnot = UnitaryOp::permutation(vec![qubit("b"), qubit("a")], &[0, 1, 3, 2]).unwrap();
        let out = apply_unitary(&s, &cnot).unwrap();
        assert_eq!(out.amp(&[1, 1]), real(1.0));
    }

    #[test]
    fn density_of_plus_state() {
        let plus = StateVector::single(qubit("a"), vec![real(FRAC_1_SQRT_2); 2]).unwrap();
        let rho = density_of(&plus).unwrap();
        for z in rho.matrix().iter() {
            assert!((z - real(0.5)).norm() < 1e-15);
        }
        let zero = StateVector::new(plus.space().clone(), vec![real(0.0); 2]).unwrap();
        assert!(matches!(density_of(&zero), Err(QStateError::NotNormalized(_))));
    }

    #[test]
    fn partial_trace_of_product_is_pure() {
        let s = StateVector::product(vec![
            (qubit("a"), vec![real(0.6), real(0.8)]),
            (qubit("b"), vec![real(FRAC_1_SQRT_2), c(0.0, FRAC_1_SQRT_2)]),
        ])
        .unwrap();
        let rho_a = partial_trace(&density_of(&s).unwrap(), &["a"]).unwrap();
        rho_a.validate().unwrap();
        assert!((rho_a.purity() - 1.0).abs() < 1e-12);
        assert!((rho_a.entry(&[0], &[0]).re - 0.36).abs() < 1e-12);
        assert_eq!(partial_trace(&density_of(&s).unwrap(), &[]).unwrap_err(), QStateError::EmptyKeepSet);
    }

    #[test]
    fn reduced_matches_partial_trace_for_bell_state() {
        let space = Space::new(vec![qubit("a"), qubit("b")]).unwrap();
        let s = StateVector::new(space, vec![real(FRAC_1_SQRT_2), real(0.0), real(0.0), real(FRAC_1_SQRT_2)]).unwrap();
        let direct = s.reduced(&["b"]).unwrap();
        let via = partial_trace(&density_of(&s).unwrap(), &["b"]).unwrap();
        assert!(direct.max_abs_diff(&via).unwrap() < 1e-15);
        assert!((direct.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn space_index_roundtrip() {
        let space = Space::new(vec![qubit("a"), SubsystemLabel::new("b", 3).unwrap(), qubit("c")]).unwrap();
        for i in 0..space.dim() {
            assert_eq!(space.join(&space.split(i)), i);
        }
        assert_eq!(space.split(1), vec![0, 0, 1]);
        assert_eq!(space.strides(), vec![6, 2, 1]);
    }

    #[test]
    fn dimension_cap() {
        let big = SubsystemLabel::new("x", 1 << 10).unwrap();
        let other = SubsystemLabel::new("y", 1 << 5).unwrap();
        assert!(matches!(Space::new(vec![big, other]), Err(QStateError::TooLarge(_))));
    }
}
