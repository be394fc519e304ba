//! Dense complex linear algebra on top of nalgebra: eigenstructure with
//! defectiveness detection, numerical rank, least squares, exponentials.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("Schur iteration did not converge")]
    SchurFailed,
    #[error("matrix is numerically singular (smallest singular value {0:e})")]
    Singular(f64),
}

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `rtol * sigma_max`.
pub fn numerical_rank(m: &CMat, rtol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * top).count()
}

/// `sigma_max / sigma_min`; infinite for singular matrices.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Least-squares coefficients of `x` in the column span of `basis`, plus the
/// residual norm `|basis * coeffs - x|`.
pub fn least_squares(basis: &CMat, x: &CVec) -> (CVec, f64) {
    if basis.ncols() == 0 {
        return (CVec::zeros(0), x.norm());
    }
    let svd = basis.clone().svd(true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = top * 1e-13 * basis.nrows().max(basis.ncols()) as f64;
    let coeffs = svd.solve(x, eps).unwrap_or_else(|_| CVec::zeros(basis.ncols()));
    let residual = (basis * &coeffs - x).norm();
    (coeffs, residual)
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
pub fn null_space(m: &CMat, abs_tol: f64) -> CMat {
    let n = m.ncols();
    // Pad to square so that v_t has a full set of right singular vectors.
    let rows = m.nrows().max(n);
    let mut sq = CMat::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= abs_tol)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

pub fn expm(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.exp()
}

pub fn inverse(m: &CMat) -> Result<CMat, LinalgError> {
    let sv = singular_values(m);
    let lo = sv.last().copied().unwrap_or(0.0);
    let hi = sv.first().copied().unwrap_or(0.0);
    if hi == 0.0 || lo <= hi * 1e-15 {
        return Err(LinalgError::Singular(lo));
    }
    m.clone().try_inverse().ok_or(LinalgError::Singular(lo))
}

/// A group of numerically coincident eigenvalues and its eigenspace.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub value: Complex64,
    pub algebraic: usize,
    /// Orthonormal eigenvectors spanning the eigenspace (columns).
    pub vectors: CMat,
}

impl EigenCluster {
    pub fn geometric(&self) -> usize {
        self.vectors.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub clusters: Vec<EigenCluster>,
    /// Eigenvalue attached to each column of `vectors`.
    pub values: Vec<Complex64>,
    pub vectors: CMat,
    /// Present only when the matrix is diagonalizable.
    pub inverse: Option<CMat>,
    pub condition: f64,
    pub spectral_radius: f64,
}

impl EigenDecomposition {
    pub fn is_diagonalizable(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn max_residual(&self, a: &CMat) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(k).into_owned();
            let r = (a * &v - &v * *lam).norm() / v.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(r);
        }
        worst
    }
}

/// Eigenvalues from the complex Schur form, grouped into clusters; each
/// cluster's eigenspace comes from the null space of `A - λI`, so defective
/// eigenvalues show up as `geometric < algebraic`.
pub fn eigen_decompose(a: &CMat) -> Result<EigenDecomposition, LinalgError> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(LinalgError::NotSquare {
            rows: d,
            cols: a.ncols(),
        });
    }
    if d == 0 {
        return Ok(EigenDecomposition {
            clusters: Vec::new(),
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
            inverse: Some(CMat::zeros(0, 0)),
            condition: 1.0,
            spectral_radius: 0.0,
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * d * d).ok_or(LinalgError::SchurFailed)?;
    let (_, t) = schur.unpack();
    let raw: Vec<Complex64> = (0..d).map(|i| t[(i, i)]).collect();
    let spectral_radius = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = spectral_radius.max(1.0);
    let cluster_tol = 1e-6 * scale;

    // Single-linkage clustering in index order, deterministic.
    let mut label: Vec<usize> = (0..d).collect();
    for i in 0..d {
        for j in 0..i {
            if (raw[i] - raw[j]).norm() <= cluster_tol {
                let (li, lj) = (label[i], label[j]);
                let (keep, drop) = (li.min(lj), li.max(lj));
                for l in label.iter_mut() {
                    if *l == drop {
                        *l = keep;
                    }
                }
            }
        }
    }
    let mut roots: Vec<usize> = label.clone();
    roots.sort_unstable();
    roots.dedup();

    let a_norm = op_norm(a).max(1.0);
    let null_tol = 1e-9 * a_norm;
    let mut clusters = Vec::with_capacity(roots.len());
    for root in roots {
        let members: Vec<Complex64> = (0..d).filter(|&i| label[i] == root).map(|i| raw[i]).collect();
        let value = members.iter().sum::<Complex64>() / members.len() as f64;
        let shifted = a - CMat::identity(d, d) * value;
        let mut vectors = null_space(&shifted, null_tol);
        if vectors.ncols() > members.len() {
            vectors = vectors.columns(0, members.len()).into_owned();
        }
        clusters.push(EigenCluster {
            value,
            algebraic: members.len(),
            vectors,
        });
    }
    // Sort clusters by (imag, real) so the output order is canonical.
    clusters.sort_by(|x, y| {
        x.value
            .im
            .total_cmp(&y.value.im)
            .then(x.value.re.total_cmp(&y.value.re))
    });

    let mut values = Vec::with_capacity(d);
    let mut cols = Vec::with_capacity(d);
    for c in &clusters {
        for k in 0..c.vectors.ncols() {
            values.push(c.value);
            cols.push(c.vectors.column(k).into_owned());
        }
    }
    let vectors = if cols.is_empty() {
        CMat::zeros(d, 0)
    } else {
        CMat::from_columns(&cols)
    };
    let (inverse, condition) = if vectors.ncols() == d {
        let cond = condition_number(&vectors);
        if cond.is_finite() && cond < 1e12 {
            (inverse(&vectors).ok(), cond)
        } else {
            (None, cond)
        }
    } else {
        (None, f64::INFINITY)
    };
    Ok(EigenDecomposition {
        clusters,
        values,
        vectors,
        inverse,
        condition,
        spectral_radius,
    })
}

pub fn cvec(values: &[Complex64]) -> CVec {
    CVec::from_column_slice(values)
}

pub fn diag(values: &[Complex64]) -> CMat {
    CMat::from_diagonal(&cvec(values))
}
