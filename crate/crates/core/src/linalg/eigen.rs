//! Symmetric eigendecomposition: Householder tridiagonalization followed by
//! the implicit QL iteration (the classic tred2/tql2 pair from EISPACK).

use super::{LinalgError, SymMatrix, EPS_EIG};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit 2-norm.
    pub vector: DVector<f64>,
}

/// Full decomposition with eigenvalues ascending; column `j` of `vectors`
/// belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

const MAX_SWEEPS_PER_VALUE: usize = 60;

pub fn symmetric_eigen(s: &SymMatrix) -> Result<SymmetricEigen, LinalgError> {
    let n = s.order();
    let mut v = to_row_major(s);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, true);
    tql2(n, &mut v, &mut d, &mut e, true)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, col| v[i * n + order[col]]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues only, ascending. Skips the eigenvector accumulation.
pub fn symmetric_eigenvalues(s: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    let n = s.order();
    let mut v = to_row_major(s);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, false);
    tql2(n, &mut v, &mut d, &mut e, false)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// The `count` smallest eigenpairs, ascending, with the residual
/// `||S v - lambda v||_2 <= EPS_EIG * ||S||_F` checked on each.
pub fn min_eigenpairs(s: &SymMatrix, count: usize) -> Result<Vec<EigenPair>, LinalgError> {
    let n = s.order();
    assert!(count >= 1 && count <= n, "count must lie in 1..=order");
    let full = symmetric_eigen(s)?;
    let fro = s.frobenius_norm();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let vector = full.vectors.column(j).into_owned();
        let value = full.values[j];
        let residual = (s.as_matrix() * &vector - &vector * value).norm();
        if residual > EPS_EIG * fro.max(f64::MIN_POSITIVE) {
            return Err(LinalgError::ConvergenceFailure { residual });
        }
        out.push(EigenPair { value, vector });
    }
    Ok(out)
}

fn to_row_major(s: &SymMatrix) -> Vec<f64> {
    let n = s.order();
    let m = s.as_matrix();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = m[(i, j)];
        }
    }
    v
}

// Householder reduction to tridiagonal form. On exit `d` holds the diagonal,
// `e[1..]` the subdiagonal, and `v` the accumulated orthogonal transform when
// `vectors` is set.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if vectors {
        for i in 0..n.saturating_sub(1) {
            v[at(n - 1, i)] = v[at(i, i)];
            v[at(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[at(k, i + 1)] * v[at(k, j)];
                    }
                    for k in 0..=i {
                        v[at(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[at(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[at(n - 1, j)];
            v[at(n - 1, j)] = 0.0;
        }
        v[at(n - 1, n - 1)] = 1.0;
    } else {
        // Without accumulation the diagonal is left on v's diagonal.
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
    }
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). Rotations are applied to `v` when
// `vectors` is set.
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<(), LinalgError> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS_PER_VALUE {
                    return Err(LinalgError::ConvergenceFailure { residual: e[l].abs() });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            let hk = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * hk;
                            v[at(k, i)] = c * v[at(k, i)] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    #[test]
    fn diagonal_smallest() {
        let s = SymMatrix::from_diagonal(&[3.0, -2.0]);
        let p = min_eigenpairs(&s, 1).unwrap();
        assert_eq!(p.len(), 1);
        assert!(close(p[0].value, -2.0, 1e-14));
        assert!(close(p[0].vector[1].abs(), 1.0, 1e-14));
        assert!(close(p[0].vector[0], 0.0, 1e-14));
    }

    #[test]
    fn swap_matrix_closed_form() {
        let s = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = min_eigenpairs(&s, 2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(p[0].value, -1.0, 1e-14));
        assert!(close(p[1].value, 1.0, 1e-14));
        // Eigenvectors are defined up to sign.
        assert!(close((p[0].vector[0] * p[0].vector[1]).abs(), 0.5, 1e-14));
        assert!(close(p[0].vector[0], -p[0].vector[1], 1e-14));
        assert!(close(p[1].vector[0], p[1].vector[1], 1e-14));
        assert!(close(p[1].vector[0].abs(), r, 1e-14));
    }

    #[test]
    fn order_one_and_zero_matrix() {
        let p = min_eigenpairs(&SymMatrix::from_diagonal(&[7.5]), 1).unwrap();
        assert_eq!(p[0].value, 7.5);
        assert_eq!(p[0].vector[0].abs(), 1.0);
        let z = symmetric_eigen(&SymMatrix::zeros(4)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn values_only_match_full() {
        let s = SymMatrix::from_fn(7, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.5 } else { 0.0 });
        let full = symmetric_eigen(&s).unwrap();
        let vals = symmetric_eigenvalues(&s).unwrap();
        for (a, b) in full.values.iter().zip(&vals) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn reconstructs_and_is_orthonormal() {
        let s = SymMatrix::from_fn(9, |i, j| 1.0 / (1.0 + i as f64 + j as f64) - if i == j { 0.3 } else { 0.0 });
        let ev = symmetric_eigen(&s).unwrap();
        let q = &ev.vectors;
        let lam = DMatrix::from_diagonal(&DVector::from_vec(ev.values.clone()));
        let rec = q * lam * q.transpose();
        assert!((rec - s.as_matrix()).amax() < 1e-13);
        assert!((q.transpose() * q - DMatrix::identity(9, 9)).amax() < 1e-13);
        assert!(ev.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
