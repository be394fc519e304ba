//! Model operator pairs `(A, C)` and their eigenvector families.
//!
//! Two variants: a dense complex matrix pair, and a diagonal spectral model
//! whose modes act on the standard basis. The spectral model may declare a
//! tail of modes with tiny regularizing multipliers; vectors whose tail
//! coefficients are not dominated by those multipliers count as inadmissible,
//! which stands in for a proper solution space.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat, CVec, LinalgError};

pub const MEMBERSHIP_TOL: f64 = 1e-8;
pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix {name} is not square ({rows}x{cols})")]
    NotSquare { name: &'static str, rows: usize, cols: usize },
    #[error("dimension mismatch: A is {a}x{a}, C is {c}x{c}")]
    DimensionMismatch { a: usize, c: usize },
    #[error("C is not injective (smallest singular value {0:e})")]
    NotInjective(f64),
    #[error("A and C do not commute (|AC - CA| = {0:e})")]
    NotCommuting(f64),
    #[error("mode {0} has zero C-multiplier")]
    ZeroMultiplier(usize),
    #[error("operator has dimension zero")]
    Empty,
    #[error("tail of {tail} modes exceeds model size {dim}")]
    TailTooLong { tail: usize, dim: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    a: CMat,
    c: CMat,
    commutator: f64,
    c_sigma_min: f64,
}

impl MatrixPair {
    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }
    pub fn commutator_norm(&self) -> f64 {
        self.commutator
    }
    pub fn c_sigma_min(&self) -> f64 {
        self.c_sigma_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    pub lambda: Complex64,
    pub c: Complex64,
}

/// The last `modes` entries of a spectral model form its tail; a vector is
/// admissible when `|x_j| ≤ bound·|c_j|·‖x‖` on every tail entry.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TailRule {
    pub modes: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    modes: Vec<SpectralMode>,
    tail: TailRule,
}

impl SpectralModel {
    pub fn modes(&self) -> &[SpectralMode] {
        &self.modes
    }
    pub fn tail(&self) -> TailRule {
        self.tail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorPair {
    Matrix(MatrixPair),
    Spectral(SpectralModel),
}

pub fn make_matrix_pair(a: CMat, c: CMat) -> Result<OperatorPair, ModelError> {
    if a.nrows() != a.ncols() {
        return Err(ModelError::NotSquare { name: "A", rows: a.nrows(), cols: a.ncols() });
    }
    if c.nrows() != c.ncols() {
        return Err(ModelError::NotSquare { name: "C", rows: c.nrows(), cols: c.ncols() });
    }
    if a.nrows() != c.nrows() {
        return Err(ModelError::DimensionMismatch { a: a.nrows(), c: c.nrows() });
    }
    let d = a.nrows();
    if d == 0 {
        return Err(ModelError::Empty);
    }
    let sv = linalg::singular_values(&c);
    let (hi, lo) = (sv[0], sv[d - 1]);
    if !(lo > f64::EPSILON * d as f64 * hi) {
        return Err(ModelError::NotInjective(lo));
    }
    let comm = linalg::op_norm(&(&a * &c - &c * &a));
    if comm > 1e-12 * (linalg::op_norm(&a) * hi).max(1.0) {
        return Err(ModelError::NotCommuting(comm));
    }
    Ok(OperatorPair::Matrix(MatrixPair { a, c, commutator: comm, c_sigma_min: lo }))
}

/// `(A, I)`.
pub fn make_generator(a: CMat) -> Result<OperatorPair, ModelError> {
    let d = a.nrows();
    make_matrix_pair(a, CMat::identity(d, d))
}

pub fn make_spectral(modes: Vec<SpectralMode>, tail: TailRule) -> Result<OperatorPair, ModelError> {
    if modes.is_empty() {
        return Err(ModelError::Empty);
    }
    if let Some(j) = modes.iter().position(|m| m.c == Complex64::new(0.0, 0.0)) {
        return Err(ModelError::ZeroMultiplier(j));
    }
    if tail.modes > modes.len() {
        return Err(ModelError::TailTooLong { tail: tail.modes, dim: modes.len() });
    }
    Ok(OperatorPair::Spectral(SpectralModel { modes, tail }))
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        match self {
            OperatorPair::Matrix(m) => m.a.nrows(),
            OperatorPair::Spectral(s) => s.modes.len(),
        }
    }

    pub fn a_matrix(&self) -> CMat {
        match self {
            OperatorPair::Matrix(m) => m.a.clone(),
            OperatorPair::Spectral(s) => linalg::diag(&s.modes.iter().map(|m| m.lambda).collect::<Vec<_>>()),
        }
    }

    pub fn c_matrix(&self) -> CMat {
        match self {
            OperatorPair::Matrix(m) => m.c.clone(),
            OperatorPair::Spectral(s) => linalg::diag(&s.modes.iter().map(|m| m.c).collect::<Vec<_>>()),
        }
    }

    /// Smallest singular value of `C`.
    pub fn c_sigma_min(&self) -> f64 {
        match self {
            OperatorPair::Matrix(m) => m.c_sigma_min,
            OperatorPair::Spectral(s) => s.modes.iter().map(|m| m.c.norm()).fold(f64::INFINITY, f64::min),
        }
    }

    /// `‖AC - CA‖`; identically zero for spectral models.
    pub fn commutator_norm(&self) -> f64 {
        match self {
            OperatorPair::Matrix(m) => m.commutator,
            OperatorPair::Spectral(_) => 0.0,
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, OperatorPair::Spectral(_))
    }

    /// Largest violation of the tail rule, as a multiple of the allowance;
    /// values above 1 mean inadmissible.
    pub fn admissibility_ratio(&self, x: &CVec) -> f64 {
        let OperatorPair::Spectral(s) = self else { return 0.0 };
        let d = s.modes.len();
        let norm = x.norm();
        if s.tail.modes == 0 || norm == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for j in d - s.tail.modes..d {
            let allowed = s.tail.bound * s.modes[j].c.norm() * norm;
            let ratio = if allowed > 0.0 {
                x[j].norm() / allowed
            } else if x[j].norm() > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(ratio);
        }
        worst
    }

    pub fn is_admissible(&self, x: &CVec) -> bool {
        self.admissibility_ratio(x) <= 1.0
    }

    /// Norm of the tail component of `x`, the truncation error carried by
    /// dropping the tail modes.
    pub fn tail_error(&self, x: &CVec) -> f64 {
        let OperatorPair::Spectral(s) = self else { return 0.0 };
        let d = s.modes.len();
        (d - s.tail.modes..d).map(|j| x[j].norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EigenClass {
    D,
    D0,
    H,
    H0,
}

impl EigenClass {
    pub fn label(self) -> &'static str {
        match self {
            EigenClass::D => "D",
            EigenClass::D0 => "D0",
            EigenClass::H => "H",
            EigenClass::H0 => "H0",
        }
    }
}

/// Cut below which real or imaginary parts count as zero.
pub fn classification_cut(spectral_radius: f64) -> f64 {
    1e-12 * spectral_radius.max(1.0)
}

/// Every class the eigenvalue belongs to.
pub fn classify(lambda: Complex64, spectral_radius: f64) -> Vec<EigenClass> {
    let cut = classification_cut(spectral_radius);
    let zero = lambda.norm() <= cut;
    let mut out = Vec::new();
    if lambda.re.abs() <= cut {
        out.push(EigenClass::D);
        if !zero {
            out.push(EigenClass::D0);
        }
    }
    if lambda.im.abs() <= cut && lambda.re <= cut {
        out.push(EigenClass::H);
        if !zero {
            out.push(EigenClass::H0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
}

impl EigenPair {
    pub fn vector(&self) -> CVec {
        linalg::cvec(&self.vector)
    }

    pub fn residual(&self, a: &CMat) -> f64 {
        let v = self.vector();
        (a * &v - &v * self.value).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSet {
    pub class: EigenClass,
    pub dim: usize,
    pub members: Vec<EigenPair>,
}

impl EigenSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Eigenvectors as columns.
    pub fn basis(&self) -> CMat {
        if self.members.is_empty() {
            return CMat::zeros(self.dim, 0);
        }
        let cols: Vec<CVec> = self.members.iter().map(|m| m.vector()).collect();
        CMat::from_columns(&cols)
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.members.iter().map(|m| m.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSets {
    pub d: EigenSet,
    pub d0: EigenSet,
    pub h: EigenSet,
    pub h0: EigenSet,
    /// Every eigenpair found, classified or not.
    pub all: Vec<EigenPair>,
    pub diagonalizable: bool,
    pub condition: f64,
    pub spectral_radius: f64,
    pub diagnostics: Vec<String>,
}

impl EigenSets {
    pub fn get(&self, class: EigenClass) -> &EigenSet {
        match class {
            EigenClass::D => &self.d,
            EigenClass::D0 => &self.d0,
            EigenClass::H => &self.h,
            EigenClass::H0 => &self.h0,
        }
    }
}

/// Eigenvector families `D, D₀, H, H₀`. Pairs whose residual exceeds
/// `tol·‖v‖` are dropped with a diagnostic.
pub fn eigensets(pair: &OperatorPair, tol: f64) -> Result<EigenSets, ModelError> {
    let d = pair.dim();
    let a = pair.a_matrix();
    let mut diagnostics = Vec::new();
    let (pairs, diagonalizable, condition, rho) = match pair {
        OperatorPair::Spectral(s) => {
            let pairs: Vec<EigenPair> = s
                .modes
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    let mut v = vec![Complex64::new(0.0, 0.0); d];
                    v[j] = Complex64::new(1.0, 0.0);
                    EigenPair { value: m.lambda, vector: v }
                })
                .collect();
            let rho = s.modes.iter().map(|m| m.lambda.norm()).fold(0.0, f64::max);
            (pairs, true, 1.0, rho)
        }
        OperatorPair::Matrix(_) => {
            let e = linalg::eigen_decompose(&a)?;
            if !e.is_diagonalizable() {
                diagnostics.push(format!(
                    "matrix is not diagonalizable: {} independent eigenvectors for dimension {d}",
                    e.vectors.ncols()
                ));
            } else if e.condition > 1e8 {
                diagnostics.push(format!("ill-conditioned eigenbasis (cond {:.3e})", e.condition));
            }
            let pairs = (0..e.values.len())
                .map(|k| EigenPair {
                    value: e.values[k],
                    vector: e.vectors.column(k).iter().copied().collect(),
                })
                .collect();
            (pairs, e.is_diagonalizable(), e.condition, e.spectral_radius)
        }
    };
    let mut sets: Vec<EigenSet> = [EigenClass::D, EigenClass::D0, EigenClass::H, EigenClass::H0]
        .into_iter()
        .map(|class| EigenSet { class, dim: d, members: Vec::new() })
        .collect();
    let mut all = Vec::new();
    for p in pairs {
        let r = p.residual(&a);
        let vn = p.vector().norm();
        if r > tol * vn {
            diagnostics.push(format!("eigenpair {} dropped: residual {r:.3e}", p.value));
            continue;
        }
        for class in classify(p.value, rho) {
            let idx = class as usize;
            sets[idx].members.push(p.clone());
        }
        all.push(p);
    }
    let mut it = sets.into_iter();
    Ok(EigenSets {
        d: it.next().unwrap(),
        d0: it.next().unwrap(),
        h: it.next().unwrap(),
        h0: it.next().unwrap(),
        all,
        diagonalizable,
        condition,
        spectral_radius: rho,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanMembership {
    pub coefficients: Vec<Complex64>,
    pub residual: f64,
    pub member: bool,
}

pub fn span_membership(x: &CVec, set: &EigenSet) -> SpanMembership {
    span_membership_basis(x, &set.basis())
}

pub fn span_membership_basis(x: &CVec, basis: &CMat) -> SpanMembership {
    let (coef, residual) = linalg::least_squares(basis, x);
    SpanMembership {
        coefficients: coef.iter().copied().collect(),
        residual,
        member: residual <= MEMBERSHIP_TOL * x.norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Totality {
    pub rank: usize,
    pub total: bool,
}

pub fn totality_check(set: &EigenSet, dim: usize) -> Totality {
    let rank = linalg::numerical_rank(&set.basis(), RANK_TOL);
    Totality { rank, total: rank == dim }
}
