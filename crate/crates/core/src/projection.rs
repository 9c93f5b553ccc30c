//! Projection onto the PSD cone along a ray: `t* = max { t : X + t D >= 0 }`
//! together with first-hit vectors.
//!
//! The dispatch follows the structure of `X`'s core factor:
//!
//! * **A / B**: `D = K D' K^T` is solvable (`D` lies in the image of `X`). The
//!   problem reduces to `I_c + t D' >= 0`, so `t* = -1 / lambda_min(D')`.
//! * **C**: `D` escapes the image but the coupling block `G` of
//!   `D = [K N] [[F, G^T], [G, E]] [K N]^T` vanishes. C1 (`E >= 0`) reduces to
//!   `I_c + t F`; C2 (`E` indefinite) forces `t* = 0`.
//! * **D**: `G != 0`. Either the 2x2 obstruction `[[1, t], [t, 0]]` is present
//!   (no hit vector exists), or the problem is shifted by a small `t1` and
//!   re-projected, now with `D` in the image of `X + t1 D`.

use crate::linalg::{
    ldl_core_factor, min_eigenpairs, min_norm_solve, qr_active_factor, symmetric_eigen, symmetric_eigenvalues,
    LdlCoreFactor, LinalgError, QrActiveFactor, SymMatrix,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A nonnegative step length that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepLength {
    Finite(f64),
    Unbounded,
}

impl StepLength {
    pub fn is_finite(self) -> bool {
        matches!(self, StepLength::Finite(_))
    }

    /// Finite value, `f64::INFINITY` when unbounded.
    pub fn value(self) -> f64 {
        match self {
            StepLength::Finite(t) => t,
            StepLength::Unbounded => f64::INFINITY,
        }
    }

    pub fn min(self, other: StepLength) -> StepLength {
        match (self, other) {
            (StepLength::Unbounded, o) => o,
            (s, StepLength::Unbounded) => s,
            (StepLength::Finite(a), StepLength::Finite(b)) => StepLength::Finite(a.min(b)),
        }
    }

    pub fn offset(self, t: f64) -> StepLength {
        match self {
            StepLength::Finite(v) => StepLength::Finite(v + t),
            StepLength::Unbounded => StepLength::Unbounded,
        }
    }
}

impl fmt::Display for StepLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepLength::Finite(t) => write!(f, "{t}"),
            StepLength::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    A,
    B,
    C1,
    C2,
    D1,
    D2,
    #[serde(rename = "D-tricky")]
    DTricky,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 7] =
        [CaseLabel::A, CaseLabel::B, CaseLabel::C1, CaseLabel::C2, CaseLabel::D1, CaseLabel::D2, CaseLabel::DTricky];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::A => "A",
            CaseLabel::B => "B",
            CaseLabel::C1 => "C1",
            CaseLabel::C2 => "C2",
            CaseLabel::D1 => "D1",
            CaseLabel::D2 => "D2",
            CaseLabel::DTricky => "D-tricky",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CaseLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseLabel::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown case label `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTolerances {
    pub eps_core: f64,
    pub eps_img: f64,
    pub eps_qr: f64,
    pub eps_psd: f64,
    pub eps_hit: f64,
    pub eps_neg: f64,
    /// Ascending shift points tried in case D.
    pub t1_list: Vec<f64>,
    /// Emit a second cut from the second-smallest reduced eigenvalue when it
    /// is negative.
    pub second_hit: bool,
}

impl Default for ProjectionTolerances {
    fn default() -> Self {
        Self {
            eps_core: 1e-10,
            eps_img: 1e-8,
            eps_qr: 1e-10,
            eps_psd: 1e-10,
            eps_hit: 1e-6,
            eps_neg: 1e-8,
            t1_list: vec![1e-6],
            second_hit: true,
        }
    }
}

impl ProjectionTolerances {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        let all = [self.eps_core, self.eps_img, self.eps_qr, self.eps_psd, self.eps_hit, self.eps_neg];
        if all.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(ProjectionError::BadInput("tolerances must be positive and finite".into()));
        }
        if self.t1_list.is_empty() || self.t1_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(ProjectionError::BadInput("t1_list must hold positive finite values".into()));
        }
        if self.t1_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProjectionError::BadInput("t1_list must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDiagnostics {
    /// `v^T (X + t* D) v` for the first hit vector.
    pub hit_residual: Option<f64>,
    /// `v^T D v` for the first hit vector.
    pub hit_slope: Option<f64>,
    /// Smallest and second-smallest eigenvalue of the reduced matrix used.
    pub lambda_min: Option<f64>,
    pub lambda_second: Option<f64>,
    pub core_rank: usize,
    pub active_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub t_star: StepLength,
    /// Zero, one, or two unit vectors; the first is the first-hit vector.
    pub hit_vectors: Vec<DVector<f64>>,
    pub case_label: CaseLabel,
    pub diagnostics: ProjectionDiagnostics,
}

impl ProjectionOutcome {
    /// `max(1, ||X||_max, t* ||D||_max)`, the scale for certificate checks.
    pub fn scale(&self, x: &SymMatrix, d: &SymMatrix) -> f64 {
        let t = match self.t_star {
            StepLength::Finite(t) => t,
            StepLength::Unbounded => 0.0,
        };
        1.0_f64.max(x.max_abs()).max(t * d.max_abs())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("bad projection input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("case D could not be resolved for any shift in t1_list")]
    CaseDUnresolved,
}

pub fn project_psd(x: &SymMatrix, d: &SymMatrix, tol: &ProjectionTolerances) -> Result<ProjectionOutcome, ProjectionError> {
    if x.order() != d.order() {
        return Err(ProjectionError::BadInput(format!("orders differ: X is {}, D is {}", x.order(), d.order())));
    }
    project_inner(x, d, tol, true)
}

fn project_inner(
    x: &SymMatrix,
    d: &SymMatrix,
    tol: &ProjectionTolerances,
    allow_case_d: bool,
) -> Result<ProjectionOutcome, ProjectionError> {
    let factor = match ldl_core_factor(x, tol.eps_core) {
        Ok(f) => f,
        Err(LinalgError::NotPsd { index, pivot }) => {
            return Err(ProjectionError::BadInput(format!(
                "X is not positive semidefinite (pivot {pivot:e} at {index})"
            )))
        }
        Err(e) => return Err(e.into()),
    };

    if let Some(d_prime) = crate::linalg::congruent_solve(&factor, d, tol.eps_img) {
        let label = if factor.is_full_rank() { CaseLabel::A } else { CaseLabel::B };
        return reduced_in_image(x, d, &factor, &d_prime, label, tol);
    }

    let qr = qr_active_factor(&factor, d, tol.eps_qr)?;
    if qr.m() == 0 {
        // The QR found no escaping direction after all.
        let label = if factor.is_full_rank() { CaseLabel::A } else { CaseLabel::B };
        return reduced_in_image(x, d, &factor, &qr.f(), label, tol);
    }

    let block_scale = qr.d_blocks.max_abs();
    let g_max = qr.g().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if g_max <= tol.eps_img * block_scale {
        return case_c(x, d, &factor, &qr, tol);
    }
    if !allow_case_d {
        return Err(ProjectionError::CaseDUnresolved);
    }
    project_case_d(x, d, &factor, &qr, tol)
}

/// `t* = -1/lambda_min(M)` for the reduced problem `I + t M >= 0`, or
/// unbounded when `lambda_min(M)` is nonnegative up to `eps_psd * ||M||_max`.
fn reduced_step(lam_min: f64, m_scale: f64, eps_psd: f64) -> StepLength {
    if lam_min < -eps_psd * m_scale && lam_min < 0.0 {
        StepLength::Finite(-1.0 / lam_min)
    } else {
        StepLength::Unbounded
    }
}

fn reduced_in_image(
    x: &SymMatrix,
    d: &SymMatrix,
    factor: &LdlCoreFactor,
    d_prime: &SymMatrix,
    label: CaseLabel,
    tol: &ProjectionTolerances,
) -> Result<ProjectionOutcome, ProjectionError> {
    let mut diagnostics = ProjectionDiagnostics { core_rank: factor.rank(), ..Default::default() };
    let c = d_prime.order();
    if c == 0 {
        return Ok(ProjectionOutcome { t_star: StepLength::Unbounded, hit_vectors: vec![], case_label: label, diagnostics });
    }
    let eig = symmetric_eigen(d_prime)?;
    let lam = eig.values[0];
    diagnostics.lambda_min = Some(lam);
    diagnostics.lambda_second = eig.values.get(1).copied();
    let t_star = reduced_step(lam, d_prime.max_abs(), tol.eps_psd);
    let mut hits = Vec::new();
    if t_star.is_finite() {
        let k_cc = factor.k_cc();
        let count = if tol.second_hit { 2.min(c) } else { 1 };
        for j in 0..count {
            if j > 0 && eig.values[j] >= 0.0 {
                break;
            }
            let u: Vec<f64> = eig.vectors.column(j).iter().copied().collect();
            let v = crate::linalg::lift_core_vector(factor, &k_cc, &u);
            if let Some(v) = normalized(v) {
                hits.push(v);
            }
        }
    }
    finish(x, d, t_star, hits, label, diagnostics)
}

fn case_c(
    x: &SymMatrix,
    d: &SymMatrix,
    factor: &LdlCoreFactor,
    qr: &QrActiveFactor,
    tol: &ProjectionTolerances,
) -> Result<ProjectionOutcome, ProjectionError> {
    let c = qr.c();
    let m = qr.m();
    let mut diagnostics = ProjectionDiagnostics { core_rank: c, active_count: m, ..Default::default() };
    let e = qr.e();
    let e_eig = symmetric_eigen(&e)?;
    let e_floor = -tol.eps_psd * qr.d_blocks.max_abs().max(1.0);
    let basis = qr.lift_basis(&factor.k_nc);
    let count = if tol.second_hit { 2 } else { 1 };

    if e_eig.values[0] >= e_floor {
        // C1: the E block is PSD; only I_c + t F matters.
        if c == 0 {
            return finish(x, d, StepLength::Unbounded, vec![], CaseLabel::C1, diagnostics);
        }
        let f = qr.f();
        let f_eig = symmetric_eigen(&f)?;
        diagnostics.lambda_min = Some(f_eig.values[0]);
        diagnostics.lambda_second = f_eig.values.get(1).copied();
        let t_star = reduced_step(f_eig.values[0], f.max_abs(), tol.eps_psd);
        let mut hits = Vec::new();
        if t_star.is_finite() {
            for j in 0..count.min(c) {
                if j > 0 && f_eig.values[j] >= 0.0 {
                    break;
                }
                let mut reduced = vec![0.0; c + m];
                for i in 0..c {
                    reduced[i] = f_eig.vectors[(i, j)];
                }
                if let Some(v) = normalized(min_norm_solve(&basis, &reduced)?) {
                    hits.push(v);
                }
            }
        }
        finish(x, d, t_star, hits, CaseLabel::C1, diagnostics)
    } else {
        // C2: any t > 0 leaves the cone along a negative direction of E.
        diagnostics.lambda_min = Some(e_eig.values[0]);
        diagnostics.lambda_second = e_eig.values.get(1).copied();
        let hits = escape_hits(qr, &basis, &e_eig, e_floor, count)?;
        finish(x, d, StepLength::Finite(0.0), hits, CaseLabel::C2, diagnostics)
    }
}

/// Lifts negative eigenvectors `u` of `E` to `v` with `K^T v = 0`,
/// `N^T v = u`, so `v^T X v = 0` and `v^T D v = lambda < 0`.
fn escape_hits(
    qr: &QrActiveFactor,
    basis: &nalgebra::DMatrix<f64>,
    e_eig: &crate::linalg::SymmetricEigen,
    e_floor: f64,
    count: usize,
) -> Result<Vec<DVector<f64>>, ProjectionError> {
    let c = qr.c();
    let m = qr.m();
    let mut hits = Vec::new();
    for j in 0..count.min(m) {
        if e_eig.values[j] >= e_floor {
            break;
        }
        let mut reduced = vec![0.0; c + m];
        for i in 0..m {
            reduced[c + i] = e_eig.vectors[(i, j)];
        }
        if let Some(v) = normalized(min_norm_solve(basis, &reduced)?) {
            hits.push(v);
        }
    }
    Ok(hits)
}

/// Case D: the coupling block `G` is nonzero.
///
/// First the obstruction test: a zero diagonal entry of `E` whose row of `G`
/// is nonzero makes every `t > 0` infeasible with no certifying vector
/// (D-tricky). An indefinite `E` also blocks every `t > 0`, and then the
/// lifted negative eigenvector of `E` is an exact hit (D1). Otherwise, for
/// the shift `t1` (first of `t1_list`), an indefinite `X + t1 D` gives
/// `t* = 0` with its negative eigenvector as an approximate hit (D1); a PSD
/// one is re-projected, `t* = t1 + t2*` (D2).
/// Later shifts are tried only when the re-projection does not land in case
/// A or B.
pub fn project_case_d(
    x: &SymMatrix,
    d: &SymMatrix,
    factor: &LdlCoreFactor,
    qr: &QrActiveFactor,
    tol: &ProjectionTolerances,
) -> Result<ProjectionOutcome, ProjectionError> {
    let c = qr.c();
    let m = qr.m();
    let block_scale = qr.d_blocks.max_abs();
    let thr = tol.eps_img * block_scale;
    let diagnostics = ProjectionDiagnostics { core_rank: factor.rank(), active_count: m, ..Default::default() };

    let e = qr.e();
    let g = qr.g();
    for i in 0..m {
        let coupled = (0..c).any(|j| g[(i, j)].abs() > thr);
        if e.get(i, i).abs() <= thr && coupled {
            return Ok(ProjectionOutcome {
                t_star: StepLength::Finite(0.0),
                hit_vectors: vec![],
                case_label: CaseLabel::DTricky,
                diagnostics,
            });
        }
    }

    let e_eig = symmetric_eigen(&e)?;
    let e_floor = -tol.eps_psd * block_scale.max(1.0);
    if e_eig.values[0] < e_floor {
        let basis = qr.lift_basis(&factor.k_nc);
        let count = if tol.second_hit { 2 } else { 1 };
        let hits = escape_hits(qr, &basis, &e_eig, e_floor, count)?;
        if !hits.is_empty() {
            let mut diagnostics = diagnostics.clone();
            diagnostics.lambda_min = Some(e_eig.values[0]);
            diagnostics.lambda_second = e_eig.values.get(1).copied();
            return finish(x, d, StepLength::Finite(0.0), hits, CaseLabel::D1, diagnostics);
        }
    }

    for (idx, &t1) in tol.t1_list.iter().enumerate() {
        let shifted = x.plus_scaled(t1, d);
        let scale = 1.0_f64.max(x.max_abs()).max(t1 * d.max_abs());
        let low = min_eigenpairs(&shifted, 1)?;
        if low[0].value < -tol.eps_psd * scale {
            if idx > 0 {
                break;
            }
            let mut diagnostics = diagnostics.clone();
            diagnostics.lambda_min = Some(low[0].value);
            let w = low[0].vector.clone();
            return finish(x, d, StepLength::Finite(0.0), vec![w], CaseLabel::D1, diagnostics);
        }
        match project_inner(&shifted, d, tol, false) {
            Ok(inner) if matches!(inner.case_label, CaseLabel::A | CaseLabel::B) => {
                let mut diagnostics = inner.diagnostics.clone();
                diagnostics.active_count = m;
                return finish(x, d, inner.t_star.offset(t1), inner.hit_vectors, CaseLabel::D2, diagnostics);
            }
            Ok(_) | Err(ProjectionError::CaseDUnresolved) => continue,
            Err(ProjectionError::BadInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(ProjectionError::CaseDUnresolved)
}

fn normalized(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

fn finish(
    x: &SymMatrix,
    d: &SymMatrix,
    t_star: StepLength,
    hit_vectors: Vec<DVector<f64>>,
    case_label: CaseLabel,
    mut diagnostics: ProjectionDiagnostics,
) -> Result<ProjectionOutcome, ProjectionError> {
    if let (Some(v), StepLength::Finite(t)) = (hit_vectors.first(), t_star) {
        let vs = v.as_slice();
        let slope = d.quad_form(vs);
        diagnostics.hit_slope = Some(slope);
        diagnostics.hit_residual = Some(x.quad_form(vs) + t * slope);
    }
    Ok(ProjectionOutcome { t_star, hit_vectors, case_label, diagnostics })
}

/// Reference step length using only the separation primitive
/// `lambda_min(X + t D)`: doubling to bracket the boundary, then bisection.
///
/// Feasibility of `t` means `lambda_min(X + t D) >= -eps * max(1, ||X||_max,
/// t ||D||_max)`. Returns `Unbounded` when `t_cap` itself is feasible.
pub fn bisection_reference(x: &SymMatrix, d: &SymMatrix, t_cap: f64, eps: f64) -> StepLength {
    let xs = x.max_abs();
    let ds = d.max_abs();
    let feasible = |t: f64| -> bool {
        let m = x.plus_scaled(t, d);
        match symmetric_eigenvalues(&m) {
            Ok(vals) => vals[0] >= -eps * 1.0_f64.max(xs).max(t * ds),
            Err(_) => false,
        }
    };
    if !feasible(0.0) {
        return StepLength::Finite(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(t_cap);
    loop {
        if !feasible(hi) {
            break;
        }
        if hi >= t_cap {
            return StepLength::Unbounded;
        }
        lo = hi;
        hi = (hi * 2.0).min(t_cap);
    }
    while hi - lo > eps * 1.0_f64.max(lo) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    StepLength::Finite(0.5 * (lo + hi))
}

/// `lambda_min(X + t D)`.
pub fn min_eigenvalue_along(x: &SymMatrix, d: &SymMatrix, t: f64) -> Result<f64, LinalgError> {
    Ok(symmetric_eigenvalues(&x.plus_scaled(t, d))?[0])
}
