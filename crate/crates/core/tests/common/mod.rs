#![allow(dead_code)]

use nalgebra::DMatrix;
use pcsdp::linalg::SymMatrix;
use pcsdp::projection::CaseLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthogonal factor of a Gaussian matrix (Householder QR from nalgebra).
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

pub fn sym_with_spectrum(eigs: &[f64], rng: &mut impl Rng) -> DMatrix<f64> {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eigs)) * q.transpose()
}

fn uniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `len` eigenvalues in `[lo, hi]`, the first pinned to `lo`.
fn spectrum(len: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| uniform(lo, hi, rng)).collect();
    if let Some(first) = v.first_mut() {
        *first = lo;
    }
    v
}

/// Symmetric block with a clearly negative eigenvalue, or (with probability
/// `psd_prob`) a clearly positive definite one.
fn signed_block(len: usize, psd_prob: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    if rng.random::<f64>() < psd_prob {
        sym_with_spectrum(&spectrum(len, 0.1, 1.0, rng), rng)
    } else {
        let mut eigs = spectrum(len, -1.0, 1.0, rng);
        eigs[0] = uniform(-1.0, -0.2, rng);
        sym_with_spectrum(&eigs, rng)
    }
}

/// Coupling block with at least one unit entry.
fn coupling(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut g = DMatrix::from_fn(rows, cols, |_, _| uniform(-1.0, 1.0, rng));
    g[(0, 0)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    g
}

/// A pair `(X, D)` built so that the oracle lands in `case`, in a random
/// orthonormal basis. `X` has core rank `n` for case A and `< n` otherwise.
pub fn pair_for_case(case: CaseLabel, n: usize, rng: &mut impl Rng) -> (SymMatrix, SymMatrix) {
    assert!(n >= 2);
    let r = if case == CaseLabel::A { n } else { rng.random_range(1..n) };
    let z = n - r;
    let mut x0 = DMatrix::zeros(n, n);
    for i in 0..r {
        x0[(i, i)] = uniform(0.5, 2.0, rng);
    }
    let mut d0 = DMatrix::zeros(n, n);
    let put = |d0: &mut DMatrix<f64>, f: Option<DMatrix<f64>>, g: Option<DMatrix<f64>>, e: Option<DMatrix<f64>>| {
        if let Some(f) = f {
            d0.view_mut((0, 0), (r, r)).copy_from(&f);
        }
        if let Some(g) = g {
            d0.view_mut((r, 0), (z, r)).copy_from(&g);
            d0.view_mut((0, r), (r, z)).copy_from(&g.transpose());
        }
        if let Some(e) = e {
            d0.view_mut((r, r), (z, z)).copy_from(&e);
        }
    };
    match case {
        CaseLabel::A => put(&mut d0, Some(signed_block(n, 0.2, rng)), None, None),
        CaseLabel::B => put(&mut d0, Some(signed_block(r, 0.2, rng)), None, None),
        CaseLabel::C1 => {
            let f = signed_block(r, 0.2, rng);
            let e = sym_with_spectrum(&spectrum(z, 0.1, 1.0, rng), rng);
            put(&mut d0, Some(f), None, Some(e))
        }
        CaseLabel::C2 => {
            let f = signed_block(r, 0.5, rng);
            put(&mut d0, Some(f), None, Some(signed_block(z, 0.0, rng)))
        }
        CaseLabel::DTricky => {
            let f = signed_block(r, 0.5, rng);
            put(&mut d0, Some(f), Some(coupling(z, r, rng)), None)
        }
        CaseLabel::D1 => {
            let f = signed_block(r, 0.5, rng);
            let (g, e) = (coupling(z, r, rng), signed_block(z, 0.0, rng));
            put(&mut d0, Some(f), Some(g), Some(e))
        }
        CaseLabel::D2 => {
            if rng.random::<f64>() < 0.2 {
                // Positive definite D: the step is unbounded.
                d0 = sym_with_spectrum(&spectrum(n, 0.1, 1.0, rng), rng);
            } else {
                let f = signed_block(r, 0.0, rng);
                let e = sym_with_spectrum(&spectrum(z, 0.5, 1.5, rng), rng);
                put(&mut d0, Some(f), Some(coupling(z, r, rng).scale(0.3)), Some(e))
            }
        }
    }
    let q = random_orthogonal(n, rng);
    let x = SymMatrix::symmetrize(&(&q * x0 * q.transpose()));
    let d = SymMatrix::symmetrize(&(&q * d0 * q.transpose()));
    (x, d)
}

/// Dense tableau simplex for `max c^T y s.t. A y <= b` with free `y`, used as
/// an independent reference. Free variables are split `y = p - q`, slack
/// basis requires `b >= 0`. Bland's rule throughout.
pub fn tableau_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = a.len();
    let k = c.len();
    let cols = 2 * k + m;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0, "reference simplex needs a feasible origin");
        for j in 0..k {
            t[i][j] = a[i][j];
            t[i][k + j] = -a[i][j];
        }
        t[i][2 * k + i] = 1.0;
        t[i][cols] = b[i];
    }
    for j in 0..k {
        t[m][j] = -c[j];
        t[m][k + j] = c[j];
    }
    let mut basis: Vec<usize> = (0..m).map(|i| 2 * k + i).collect();
    for _ in 0..100_000 {
        let Some(enter) = (0..cols).find(|&j| t[m][j] < -1e-12) else {
            let mut y = vec![0.0; k];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < k {
                    y[bv] += t[i][cols];
                } else if bv < 2 * k {
                    y[bv - k] -= t[i][cols];
                }
            }
            return Some((y, t[m][cols]));
        };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > 1e-12 {
                let ratio = t[i][cols] / t[i][enter];
                if ratio < best - 1e-12 || (ratio <= best + 1e-12 && leave.is_some_and(|l: usize| basis[i] < basis[l])) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let l = leave?;
        let p = t[l][enter];
        for v in t[l].iter_mut() {
            *v /= p;
        }
        for i in 0..=m {
            if i != l {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..=cols {
                        t[i][j] -= f * t[l][j];
                    }
                }
            }
        }
        basis[l] = enter;
    }
    None
}

/// `v^T M v` with plain loops.
pub fn quad(m: &SymMatrix, v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += v[i] * m.get(i, j) * v[j];
        }
    }
    s
}
