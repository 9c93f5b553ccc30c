//! Unpivoted LDL^T with core-position detection.
//!
//! `X = L diag(p) L^T`. Position `j` is non-core when its contribution
//! `p_j L_j L_j^T` is negligible; non-core pivots are zeroed and their
//! column of `L` replaced by the unit vector. The surviving columns, scaled
//! by `sqrt(p_j)`, form `K_nc` with `X ~= K_nc K_nc^T`.
//!
//! Plain elimination loses accuracy after a tiny but genuine pivot. Its
//! result is audited against the spectral rank and the reconstruction
//! residual; on failure the same rule is re-run on the rows of the spectral
//! factor, where pivots are residual norms.

use super::{symmetric_eigen, LinalgError, SymMatrix};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LdlCoreFactor {
    /// n x c, lower-trapezoidal on the core rows.
    pub k_nc: DMatrix<f64>,
    /// Ascending indices of the core positions.
    pub core_positions: Vec<usize>,
    pub raw_l: DMatrix<f64>,
    pub raw_p: Vec<f64>,
}

impl LdlCoreFactor {
    pub fn order(&self) -> usize {
        self.raw_l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.core_positions.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.order()
    }

    /// `K_nc` restricted to the core rows; lower-triangular with positive
    /// diagonal.
    pub fn k_cc(&self) -> DMatrix<f64> {
        let c = self.rank();
        DMatrix::from_fn(c, c, |i, j| self.k_nc[(self.core_positions[i], j)])
    }
}

pub fn ldl_core_factor(x: &SymMatrix, eps_core: f64) -> Result<LdlCoreFactor, LinalgError> {
    let scale = x.max_abs().max(1.0);
    let thr = eps_core * scale;
    let eig = symmetric_eigen(x)?;
    if eig.values[0] < -thr {
        let (index, pivot) = match eliminate(x, thr) {
            Err(LinalgError::NotPsd { index, pivot }) => (index, pivot),
            _ => (x.order() - 1, eig.values[0]),
        };
        return Err(LinalgError::NotPsd { index, pivot });
    }
    let spectral_rank = eig.values.iter().filter(|&&l| l > thr).count();
    if let Ok(f) = eliminate(x, thr) {
        let err = (x.as_matrix() - &f.k_nc * f.k_nc.transpose()).amax();
        if f.rank() == spectral_rank && err <= AUDIT_TOL * scale {
            return Ok(f);
        }
    }
    Ok(orthogonal_factor(x, &eig, thr))
}

/// Reconstruction error above which the plain elimination is redone.
const AUDIT_TOL: f64 = 1e-11;

/// The unpivoted elimination, exact on small well-conditioned inputs but
/// prone to rounding growth after tiny pivots.
fn eliminate(x: &SymMatrix, thr: f64) -> Result<LdlCoreFactor, LinalgError> {
    let n = x.order();
    let a = x.as_matrix();
    // A PSD matrix has r_i^2 <= p_j * S_ii for the residual column r of a
    // pivot p_j, so a vanishing pivot with a residual above this bound means
    // the input is materially indefinite.
    let residual_bound = (thr * x.max_abs().max(1.0)).sqrt();

    let mut l = DMatrix::<f64>::identity(n, n);
    let mut p = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut core = Vec::with_capacity(n);

    for j in 0..n {
        for i in j..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                if p[k] != 0.0 {
                    s -= l[(i, k)] * l[(j, k)] * p[k];
                }
            }
            r[i] = s;
        }
        let pivot = r[j];
        if pivot < -thr {
            return Err(LinalgError::NotPsd { index: j, pivot });
        }
        let max_r = r[j..n].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let contribution = if pivot > 0.0 { max_r * max_r / pivot } else { 0.0 };
        if pivot <= thr || contribution <= thr {
            let off = r[j + 1..n].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if off > residual_bound {
                return Err(LinalgError::NotPsd { index: j, pivot });
            }
            p[j] = 0.0;
        } else {
            p[j] = pivot;
            for i in j + 1..n {
                l[(i, j)] = r[i] / pivot;
            }
            core.push(j);
        }
    }
    Ok(assemble(l, p, core))
}

/// Same positional rule, applied to the rows of `K = V_r sqrt(Lambda_r)`:
/// the Schur pivot of position `j` is the squared residual of row `j` after
/// projecting out the rows already chosen, computed by reorthogonalized
/// Gram-Schmidt instead of elimination.
fn orthogonal_factor(x: &SymMatrix, eig: &super::SymmetricEigen, thr: f64) -> LdlCoreFactor {
    let n = x.order();
    let kept: Vec<usize> = (0..n).filter(|&j| eig.values[j] > thr).collect();
    let r = kept.len();
    let rows = DMatrix::from_fn(n, r, |i, c| eig.vectors[(i, kept[c])] * eig.values[kept[c]].sqrt());

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut p = vec![0.0; n];
    let mut core = Vec::with_capacity(r);
    for j in 0..n {
        if basis.len() == r {
            break;
        }
        let mut res = rows.row(j).transpose();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&res);
                res.axpy(-proj, q, 1.0);
            }
        }
        let pivot = res.norm_squared();
        if pivot == 0.0 {
            continue;
        }
        // Schur column j: <k_i, res> for i >= j. Dropping j costs at most
        // max_r^2 / pivot per entry, so a tiny pivot with a live column stays.
        let schur: Vec<f64> = (j..n).map(|i| rows.row(i).transpose().dot(&res)).collect();
        let max_r = schur.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max_r * max_r / pivot <= thr {
            continue;
        }
        p[j] = pivot;
        for i in j + 1..n {
            l[(i, j)] = schur[i - j] / pivot;
        }
        core.push(j);
        basis.push(res / pivot.sqrt());
    }
    assemble(l, p, core)
}

fn assemble(l: DMatrix<f64>, p: Vec<f64>, core: Vec<usize>) -> LdlCoreFactor {
    let n = l.nrows();
    let c = core.len();
    let mut k_nc = DMatrix::zeros(n, c);
    for (col, &j) in core.iter().enumerate() {
        let s = p[j].sqrt();
        for i in j..n {
            k_nc[(i, col)] = l[(i, j)] * s;
        }
    }
    LdlCoreFactor { k_nc, core_positions: core, raw_l: l, raw_p: p }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recon_err(x: &SymMatrix, f: &LdlCoreFactor) -> f64 {
        (x.as_matrix() - &f.k_nc * f.k_nc.transpose()).amax()
    }

    #[test]
    fn rank_one_diagonal() {
        let x = SymMatrix::from_diagonal(&[4.0, 0.0]);
        let f = ldl_core_factor(&x, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.core_positions, vec![0]);
        assert_eq!(f.k_nc.column(0).as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn identity_is_its_own_factor() {
        let f = ldl_core_factor(&SymMatrix::identity(3), 1e-10).unwrap();
        assert_eq!(f.rank(), 3);
        assert_eq!(f.core_positions, vec![0, 1, 2]);
        assert_eq!(f.k_nc, DMatrix::identity(3, 3));
    }

    #[test]
    fn rank_one_outer_product() {
        let x = SymMatrix::outer(&[1.0, 1.0]);
        let f = ldl_core_factor(&x, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.k_nc.column(0).as_slice(), &[1.0, 1.0]);
        assert_eq!(f.raw_p, vec![1.0, 0.0]);
        assert_eq!(f.raw_l[(1, 0)], 1.0);
        assert_eq!(recon_err(&x, &f), 0.0);
    }

    #[test]
    fn leading_zero_pivot_is_non_core() {
        let x = SymMatrix::from_diagonal(&[0.0, 3.0, 0.0, 5.0]);
        let f = ldl_core_factor(&x, 1e-10).unwrap();
        assert_eq!(f.core_positions, vec![1, 3]);
        let kcc = f.k_cc();
        assert_eq!(kcc[(0, 1)], 0.0);
        assert!(kcc[(0, 0)] > 0.0 && kcc[(1, 1)] > 0.0);
        assert!(recon_err(&x, &f) < 1e-15);
    }

    #[test]
    fn indefinite_input_is_rejected() {
        let x = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(ldl_core_factor(&x, 1e-10), Err(LinalgError::NotPsd { index: 1, .. })));
        // Zero pivot with a live off-diagonal.
        let y = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(ldl_core_factor(&y, 1e-10), Err(LinalgError::NotPsd { index: 0, .. })));
    }
}
