//! Congruent solves against a core factor and the QR machinery used when
//! `D` leaves the image of `X`.

use super::{
    backward_substitute_transposed, backward_substitute_upper, forward_substitute,
    forward_substitute_upper_transposed,
    max_abs, LdlCoreFactor, LinalgError, SymMatrix,
};
use nalgebra::{DMatrix, DVector};

/// Solves `D = K_nc D' K_nc^T` for `D'` (order c).
///
/// The square core system `D_cc = K_cc D' K_cc^T` is solved with two
/// triangular substitutions; the result is accepted only if it reproduces
/// all of `D` within `eps_img * max(1, ||D||_max)`. `None` means `D` is not
/// in the image of `X`.
pub fn congruent_solve(factor: &LdlCoreFactor, d: &SymMatrix, eps_img: f64) -> Option<SymMatrix> {
    let c = factor.rank();
    if c == 0 {
        return (d.max_abs() <= eps_img).then(|| SymMatrix::zeros(0));
    }
    let k_cc = factor.k_cc();
    let d_cc = d.submatrix(&factor.core_positions);

    // Y = K_cc^{-1} D_cc, column by column.
    let mut y = d_cc.into_matrix();
    for j in 0..c {
        let mut col: Vec<f64> = y.column(j).iter().copied().collect();
        forward_substitute(&k_cc, &mut col);
        y.set_column(j, &DVector::from_vec(col));
    }
    // D' = Y K_cc^{-T}  <=>  D'^T = K_cc^{-1} Y^T.
    let mut z = y.transpose();
    for j in 0..c {
        let mut col: Vec<f64> = z.column(j).iter().copied().collect();
        forward_substitute(&k_cc, &mut col);
        z.set_column(j, &DVector::from_vec(col));
    }
    let d_prime = SymMatrix::symmetrize(&z.transpose());

    let k = &factor.k_nc;
    let rebuilt = k * d_prime.as_matrix() * k.transpose();
    let residual = max_abs(&(d.as_matrix() - rebuilt));
    (residual <= eps_img * d.max_abs().max(1.0)).then_some(d_prime)
}

/// Block decomposition `D = [K_nc N] [[F, G^T], [G, E]] [K_nc N]^T` where `N`
/// spans the part of `D`'s column space orthogonal to `K_nc`.
#[derive(Debug, Clone)]
pub struct QrActiveFactor {
    /// n x m, orthonormal columns, orthogonal to the columns of `K_nc`.
    pub n_basis: DMatrix<f64>,
    /// The full block matrix `D_{c+m}`.
    pub d_blocks: SymMatrix,
    /// Indices of the columns of `D` that contributed a new direction.
    pub active_columns: Vec<usize>,
    /// Orthonormal basis of the image of `K_nc`: `K_nc = q_core * r_core`.
    pub q_core: DMatrix<f64>,
    pub r_core: DMatrix<f64>,
}

impl QrActiveFactor {
    pub fn c(&self) -> usize {
        self.q_core.ncols()
    }

    pub fn m(&self) -> usize {
        self.n_basis.ncols()
    }

    pub fn f(&self) -> SymMatrix {
        let c = self.c();
        SymMatrix::from_fn(c, |i, j| self.d_blocks.get(i, j))
    }

    /// m x c.
    pub fn g(&self) -> DMatrix<f64> {
        let c = self.c();
        DMatrix::from_fn(self.m(), c, |i, j| self.d_blocks.get(c + i, j))
    }

    pub fn e(&self) -> SymMatrix {
        let c = self.c();
        SymMatrix::from_fn(self.m(), |i, j| self.d_blocks.get(c + i, c + j))
    }

    /// `[K_nc N]`, n x (c + m).
    pub fn lift_basis(&self, k_nc: &DMatrix<f64>) -> DMatrix<f64> {
        let n = k_nc.nrows();
        let c = self.c();
        let m = self.m();
        DMatrix::from_fn(n, c + m, |i, j| if j < c { k_nc[(i, j)] } else { self.n_basis[(i, j - c)] })
    }
}

/// Gram-Schmidt QR of `[K_nc D]` with reorthogonalization.
///
/// Column `c + i` is active when its residual after projecting out all
/// earlier directions exceeds `eps_qr * ||[K_nc D]||_max`. With `N` orthogonal
/// to `K_nc` the Gram matrix of `[K_nc N]` is block-diagonal, so the blocks
/// follow from `K_nc^+ = R_cc^{-1} Q_nc^T`:
/// `F = K^+ D K^{+T}`, `G = N^T D K^{+T}`, `E = N^T D N`.
pub fn qr_active_factor(factor: &LdlCoreFactor, d: &SymMatrix, eps_qr: f64) -> Result<QrActiveFactor, LinalgError> {
    let n = factor.order();
    if d.order() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: d.order() });
    }
    let k = &factor.k_nc;
    let c = k.ncols();
    let k_scale = max_abs(k);
    let scale = k_scale.max(d.max_abs());

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut r_core = DMatrix::zeros(c, c);
    for j in 0..c {
        let mut w = k.column(j).into_owned();
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let proj = q.dot(&w);
                r_core[(i, j)] += proj;
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= eps_qr * k_scale {
            return Err(LinalgError::IllConditioned { index: j, diag: norm });
        }
        r_core[(j, j)] = norm;
        basis.push(w / norm);
    }

    let dm = d.as_matrix();
    let mut active = Vec::new();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut w = dm.column(j).into_owned();
        for _pass in 0..2 {
            for q in &basis {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > eps_qr * scale {
            basis.push(w / norm);
            active.push(j);
        }
    }

    let q_core = DMatrix::from_fn(n, c, |i, j| basis[j][i]);
    let m = active.len();
    let n_basis = DMatrix::from_fn(n, m, |i, j| basis[c + j][i]);

    // K^{+T} = Q_nc R_cc^{-T}; row i is (R_cc^{-1} q_i)^T.
    let mut kpt = DMatrix::zeros(n, c);
    for i in 0..n {
        let mut row: Vec<f64> = q_core.row(i).iter().copied().collect();
        backward_substitute_upper(&r_core, &mut row);
        for j in 0..c {
            kpt[(i, j)] = row[j];
        }
    }

    let f = kpt.transpose() * dm * &kpt;
    let g = n_basis.transpose() * dm * &kpt;
    let e = n_basis.transpose() * dm * &n_basis;
    let mut blocks = DMatrix::zeros(c + m, c + m);
    blocks.view_mut((0, 0), (c, c)).copy_from(&f);
    blocks.view_mut((c, 0), (m, c)).copy_from(&g);
    blocks.view_mut((0, c), (c, m)).copy_from(&g.transpose());
    blocks.view_mut((c, c), (m, m)).copy_from(&e);
    let d_blocks = SymMatrix::symmetrize(&blocks);

    Ok(QrActiveFactor { n_basis, d_blocks, active_columns: active, q_core, r_core })
}

/// Minimum-norm solution of the underdetermined system `B^T v = rhs`, with
/// `B` of size n x r and full column rank. `v = Q R^{-T} rhs` for the thin
/// QR `B = Q R`.
pub fn min_norm_solve(b: &DMatrix<f64>, rhs: &[f64]) -> Result<DVector<f64>, LinalgError> {
    let (n, r) = b.shape();
    if rhs.len() != r {
        return Err(LinalgError::DimensionMismatch { expected: r, got: rhs.len() });
    }
    if r > n {
        return Err(LinalgError::RankDeficient { rank: n, expected: r });
    }
    let col_scale = (0..r).map(|j| b.column(j).norm()).fold(0.0_f64, f64::max);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut rr = DMatrix::zeros(r, r);
    for j in 0..r {
        let mut w = b.column(j).into_owned();
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = qi.dot(&w);
                rr[(i, j)] += proj;
                w.axpy(-proj, qi, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= 1e-12 * col_scale || norm == 0.0 {
            return Err(LinalgError::RankDeficient { rank: j, expected: r });
        }
        rr[(j, j)] = norm;
        q.push(w / norm);
    }
    let mut z = rhs.to_vec();
    forward_substitute_upper_transposed(&rr, &mut z);
    let mut v = DVector::zeros(n);
    for (qi, zi) in q.iter().zip(&z) {
        v.axpy(*zi, qi, 1.0);
    }
    Ok(v)
}

/// Solves `K_cc^T w = u` and scatters `w` onto the core positions of a
/// length-n vector (zeros elsewhere).
pub(crate) fn lift_core_vector(factor: &LdlCoreFactor, k_cc: &DMatrix<f64>, u: &[f64]) -> DVector<f64> {
    let mut w = u.to_vec();
    backward_substitute_transposed(k_cc, &mut w);
    let mut v = DVector::zeros(factor.order());
    for (&pos, wi) in factor.core_positions.iter().zip(w) {
        v[pos] = wi;
    }
    v
}
