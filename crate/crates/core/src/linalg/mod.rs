//! Dense symmetric linear algebra used by the projection oracle.
//!
//! Everything here works on small-to-medium dense matrices (n up to a few
//! hundred). Storage is `nalgebra::DMatrix<f64>`; the factorizations are
//! written out by hand because the oracle needs access to their internals
//! (core positions, active columns, zero pivots).

mod eigen;
mod ldl;
mod qr;

pub use eigen::{min_eigenpairs, symmetric_eigen, symmetric_eigenvalues, EigenPair, SymmetricEigen};
pub use ldl::{ldl_core_factor, LdlCoreFactor};
pub use qr::{congruent_solve, min_norm_solve, qr_active_factor, QrActiveFactor};
pub(crate) use qr::lift_core_vector;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default relative tolerance for accepting an eigenpair residual.
pub const EPS_EIG: f64 = 1e-10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive semidefinite: pivot {pivot:e} at position {index}")]
    NotPsd { index: usize, pivot: f64 },
    #[error("eigensolver did not converge (residual {residual:e})")]
    ConvergenceFailure { residual: f64 },
    #[error("matrix has numerical rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("triangular factor is ill-conditioned: diagonal {diag:e} at {index}")]
    IllConditioned { index: usize, diag: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix must have order at least 1")]
    Empty,
}

/// Real symmetric matrix with exactly mirrored storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { data: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { data: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }) }
    }

    /// Builds from the upper triangle of `f`: entry (i, j) with i <= j is
    /// read and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    /// Row-major dense rows. Fails unless the input is exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        for r in rows {
            if r.len() != n {
                return Err(LinalgError::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        Self::try_from_dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn try_from_dense(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(LinalgError::Empty);
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)] != m[(j, i)] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { data: m })
    }

    /// `(m + m^T) / 2`.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let n = m.nrows();
        Self::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.order();
        (0..n).map(|i| (0..n).map(|j| self.data[(i, j)]).collect()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        assert_eq!(self.order(), other.order());
        // Same floating-point operation on mirrored entries: stays symmetric.
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        Self { data: &self.data * alpha }
    }

    /// `self + t * d`.
    pub fn plus_scaled(&self, t: f64, d: &SymMatrix) -> SymMatrix {
        let mut out = self.clone();
        out.add_scaled(t, d);
        out
    }

    /// Frobenius inner product `self • other`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.data.dot(&other.data)
    }

    /// `v^T S v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.order();
        assert_eq!(v.len(), n);
        let mut acc = 0.0;
        for j in 0..n {
            let col = self.data.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * v[i];
            }
            acc += s * v[j];
        }
        acc
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        Self::from_fn(idx.len(), |i, j| self.data[(idx[i], idx[j])])
    }

    pub fn mul_vec(&self, v: &[f64]) -> DVector<f64> {
        &self.data * DVector::from_column_slice(v)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = LinalgError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Solves `L x = b` for lower-triangular `L` in place.
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = b` for lower-triangular `L` in place.
pub(crate) fn backward_substitute_transposed(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `R x = b` for upper-triangular `R` in place.
pub(crate) fn backward_substitute_upper(r: &DMatrix<f64>, b: &mut [f64]) {
    let n = r.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= r[(i, k)] * b[k];
        }
        b[i] = s / r[(i, i)];
    }
}

/// Solves `R^T x = b` for upper-triangular `R` in place (forward order).
pub(crate) fn forward_substitute_upper_transposed(r: &DMatrix<f64>, b: &mut [f64]) {
    let n = r.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= r[(k, i)] * b[k];
        }
        b[i] = s / r[(i, i)];
    }
}
