//! Random instance families with planted null eigenvectors.
//!
//! Every matrix is built as `V diag(lambda) V^T` with `V` orthonormal. A pool
//! of shared null vectors is drawn once per instance; each matrix takes each
//! shared vector with probability `insert_prob` (plus all fixed ones) as an
//! exact zero eigenvector, and the rest of its spectrum is uniform in its
//! range.
//!
//! Randomness comes from ChaCha8 with one stream per role: stream 0 for the
//! shared pool, `1 + i` for `A_i`, `k + 1` for `C` and `k + 2` for `b`.

use crate::linalg::SymMatrix;
use crate::model::{ModelError, SdpInstance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GenError {
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("base vectors are not orthonormal or are rank-deficient")]
    DegenerateBase,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BMode {
    Ones,
    RandomUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub shared_null_count: usize,
    pub insert_prob: f64,
    pub eig_range_a: [f64; 2],
    pub eig_range_c: [f64; 2],
    pub b_mode: BMode,
    pub nonneg_y: bool,
    pub fixed_null_count: usize,
}

impl GenParams {
    /// A_i spectra in [9, 10], C in [30, 50], b = 1.
    pub fn first_family(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            seed,
            shared_null_count: k / 2,
            insert_prob: 0.8,
            eig_range_a: [9.0, 10.0],
            eig_range_c: [30.0, 50.0],
            b_mode: BMode::Ones,
            nonneg_y: false,
            fixed_null_count: 0,
        }
    }

    /// Signed A_i spectra in [-20, 100], C in [0, 100].
    pub fn second_family(n: usize, k: usize, seed: u64) -> Self {
        Self { eig_range_a: [-20.0, 100.0], eig_range_c: [0.0, 100.0], ..Self::first_family(n, k, seed) }
    }

    /// `y >= 0`, random `b` in [0, 1], `n / 5` null vectors common to all matrices.
    pub fn huge_family(n: usize, k: usize, seed: u64, eig_range_a: [f64; 2], eig_range_c: [f64; 2]) -> Self {
        Self {
            eig_range_a,
            eig_range_c,
            b_mode: BMode::RandomUniform,
            nonneg_y: true,
            fixed_null_count: n / 5,
            ..Self::first_family(n, k, seed)
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::BadParams(m.into()));
        if self.n == 0 || self.k == 0 {
            return bad("n and k must be positive");
        }
        if self.shared_null_count + self.fixed_null_count > self.n {
            return bad("shared_null_count + fixed_null_count exceeds n");
        }
        if !(0.0..=1.0).contains(&self.insert_prob) {
            return bad("insert_prob must lie in [0, 1]");
        }
        for r in [self.eig_range_a, self.eig_range_c] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return bad("eigenvalue ranges must be finite with lo <= hi");
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects `v` off `basis` (twice, for stability) and normalizes; `None` if
/// nothing is left.
fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    for _ in 0..2 {
        for q in basis {
            let p = dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
    }
    let norm = dot(&v, &v).sqrt();
    if !(norm > 1e-8 * start.max(f64::MIN_POSITIVE)) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn complete_basis(base: &[Vec<f64>], n: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>, GenError> {
    for (i, u) in base.iter().enumerate() {
        if u.len() != n {
            return Err(GenError::DegenerateBase);
        }
        for (j, w) in base.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot(u, w) - target).abs() > 1e-10 {
                return Err(GenError::DegenerateBase);
            }
        }
    }
    if base.len() > n {
        return Err(GenError::DegenerateBase);
    }
    let mut out = base.to_vec();
    while out.len() < n {
        let mut tries = 0;
        loop {
            if let Some(q) = orthonormalize_against(gaussian(n, rng), &out) {
                out.push(q);
                break;
            }
            tries += 1;
            if tries > 16 {
                return Err(GenError::DegenerateBase);
            }
        }
    }
    Ok(out)
}

/// Extends orthonormal `base` to an orthonormal basis of `R^n`, keeping
/// `base` as its first vectors.
pub fn random_orthonormal_completion(base: &[Vec<f64>], n: usize, seed: u64) -> Result<Vec<Vec<f64>>, GenError> {
    complete_basis(base, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn spectral_matrix(basis: &[Vec<f64>], zero_count: usize, range: [f64; 2], rng: &mut impl Rng) -> SymMatrix {
    let n = basis.len();
    let lambda: Vec<f64> =
        (0..n).map(|j| if j < zero_count { 0.0 } else { range[0] + (range[1] - range[0]) * rng.random::<f64>() }).collect();
    let v = DMatrix::from_fn(n, n, |i, j| basis[j][i]);
    let mut scaled = v.clone();
    for (j, l) in lambda.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*l);
    }
    SymMatrix::symmetrize(&(scaled * v.transpose()))
}

/// Builds one matrix: selects its null vectors from the pool, completes the
/// basis and fills in the spectrum.
fn planted(
    shared: &[Vec<f64>],
    fixed: &[Vec<f64>],
    n: usize,
    insert_prob: f64,
    range: [f64; 2],
    rng: &mut impl Rng,
) -> Result<(SymMatrix, usize), GenError> {
    let mut base: Vec<Vec<f64>> = fixed.to_vec();
    for v in shared {
        if rng.random::<f64>() < insert_prob {
            base.push(v.clone());
        }
    }
    let zeros = base.len();
    let basis = complete_basis(&base, n, rng)?;
    Ok((spectral_matrix(&basis, zeros, range, rng), zeros))
}

/// Instance plus the planted structure, for checks.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: SdpInstance,
    pub shared_vectors: Vec<Vec<f64>>,
    pub fixed_vectors: Vec<Vec<f64>>,
    /// Null-vector count of `A_1..A_k` followed by `C`.
    pub null_counts: Vec<usize>,
}

pub fn generate_instance(p: &GenParams) -> Result<SdpInstance, GenError> {
    Ok(generate_detailed(p)?.instance)
}

pub fn generate_detailed(p: &GenParams) -> Result<GeneratedInstance, GenError> {
    p.validate()?;
    let n = p.n;
    let k = p.k;
    let mut pool_rng = stream(p.seed, 0);
    let mut pool = Vec::new();
    for _ in 0..p.fixed_null_count + p.shared_null_count {
        let q = orthonormalize_against(gaussian(n, &mut pool_rng), &pool).ok_or(GenError::DegenerateBase)?;
        pool.push(q);
    }
    let fixed = pool[..p.fixed_null_count].to_vec();
    let shared = pool[p.fixed_null_count..].to_vec();

    let mut a = Vec::with_capacity(k);
    let mut null_counts = Vec::with_capacity(k + 1);
    for i in 0..k {
        let mut rng = stream(p.seed, 1 + i as u64);
        let (m, z) = planted(&shared, &fixed, n, p.insert_prob, p.eig_range_a, &mut rng)?;
        a.push(m);
        null_counts.push(z);
    }
    let mut rng = stream(p.seed, k as u64 + 1);
    let (c, z) = planted(&shared, &fixed, n, p.insert_prob, p.eig_range_c, &mut rng)?;
    null_counts.push(z);

    let b = match p.b_mode {
        BMode::Ones => vec![1.0; k],
        BMode::RandomUniform => {
            let mut rng = stream(p.seed, k as u64 + 2);
            (0..k).map(|_| rng.random::<f64>()).collect()
        }
    };
    let instance = SdpInstance::new(b, a, c, vec![], p.nonneg_y)?;
    Ok(GeneratedInstance { instance, shared_vectors: shared, fixed_vectors: fixed, null_counts })
}
