//! Problem data: `max b^T y  s.t.  C - sum_i A_i y_i >= 0,  a^T y <= c_a`.

use crate::linalg::{min_eigenpairs, LinalgError, SymMatrix};
use crate::projection::StepLength;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Coefficients above this are normalized away when a cut is built.
pub const CUT_SCALE_LIMIT: f64 = 1e5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("multiplier {value:e} of cut {index} is negative")]
    NegativeMultiplier { index: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub c: f64,
}

impl LinearConstraint {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.a.iter().zip(y).map(|(a, y)| a * y).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct SdpInstance {
    n: usize,
    b: Vec<f64>,
    a: Vec<SymMatrix>,
    c: SymMatrix,
    linear: Vec<LinearConstraint>,
    nonneg_y: bool,
    expanded: Vec<LinearConstraint>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    k: usize,
    b: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<SymMatrix>,
    #[serde(rename = "C")]
    c: SymMatrix,
    #[serde(default)]
    linear_constraints: Vec<LinearConstraint>,
    #[serde(default)]
    nonneg_y: bool,
}

impl TryFrom<RawInstance> for SdpInstance {
    type Error = ModelError;
    fn try_from(r: RawInstance) -> Result<Self, ModelError> {
        let inst = SdpInstance::new(r.b, r.a, r.c, r.linear_constraints, r.nonneg_y)?;
        if inst.n != r.n || inst.k() != r.k {
            return Err(ModelError::Invalid(format!(
                "declared (n, k) = ({}, {}) but data has ({}, {})",
                r.n,
                r.k,
                inst.n,
                inst.k()
            )));
        }
        Ok(inst)
    }
}

impl From<SdpInstance> for RawInstance {
    fn from(i: SdpInstance) -> Self {
        RawInstance { n: i.n, k: i.k(), b: i.b, a: i.a, c: i.c, linear_constraints: i.linear, nonneg_y: i.nonneg_y }
    }
}

impl SdpInstance {
    pub fn new(
        b: Vec<f64>,
        a: Vec<SymMatrix>,
        c: SymMatrix,
        linear: Vec<LinearConstraint>,
        nonneg_y: bool,
    ) -> Result<Self, ModelError> {
        let k = b.len();
        if k == 0 {
            return Err(ModelError::Invalid("need at least one variable".into()));
        }
        if a.len() != k {
            return Err(ModelError::DimensionMismatch { expected: k, got: a.len() });
        }
        let n = c.order();
        if let Some(bad) = a.iter().find(|m| m.order() != n) {
            return Err(ModelError::DimensionMismatch { expected: n, got: bad.order() });
        }
        if let Some(bad) = linear.iter().find(|l| l.a.len() != k) {
            return Err(ModelError::DimensionMismatch { expected: k, got: bad.a.len() });
        }
        let finite = b.iter().all(|v| v.is_finite())
            && c.max_abs().is_finite()
            && a.iter().all(|m| m.max_abs().is_finite())
            && linear.iter().all(|l| l.c.is_finite() && l.a.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(ModelError::Invalid("non-finite data".into()));
        }
        let mut expanded = linear.clone();
        if nonneg_y {
            for i in 0..k {
                let mut row = vec![0.0; k];
                row[i] = -1.0;
                expanded.push(LinearConstraint { a: row, c: 0.0 });
            }
        }
        Ok(Self { n, b, a, c, linear, nonneg_y, expanded })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[SymMatrix] {
        &self.a
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    /// Linear constraints as given, without the nonnegativity rows.
    pub fn declared_linear(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn nonneg_y(&self) -> bool {
        self.nonneg_y
    }

    /// All linear constraints, with `-y_i <= 0` appended when `nonneg_y`.
    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.expanded
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, y)| b * y).sum()
    }
}

pub fn assemble_slack(inst: &SdpInstance, y: &[f64]) -> SymMatrix {
    assert_eq!(y.len(), inst.k(), "y has the wrong length");
    let mut x = inst.c.clone();
    for (ai, &yi) in inst.a.iter().zip(y) {
        if yi != 0.0 {
            x.add_scaled(-yi, ai);
        }
    }
    x
}

/// `D = -sum_i A_i (y_out_i - y_in_i)`.
pub fn assemble_direction(inst: &SdpInstance, y_in: &[f64], y_out: &[f64]) -> SymMatrix {
    assert_eq!(y_in.len(), inst.k());
    assert_eq!(y_out.len(), inst.k());
    let mut d = SymMatrix::zeros(inst.n);
    for (i, ai) in inst.a.iter().enumerate() {
        let step = y_out[i] - y_in[i];
        if step != 0.0 {
            d.add_scaled(-step, ai);
        }
    }
    d
}

/// `coeffs^T y <= rhs`, implied by `v^T (C - sum A_i y_i) v >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCut {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub origin: Vec<f64>,
    pub scale_applied: f64,
}

impl LinearCut {
    pub fn violation(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(a, y)| a * y).sum::<f64>() - self.rhs
    }
}

pub fn cut_from_vector(inst: &SdpInstance, v: &[f64]) -> LinearCut {
    assert_eq!(v.len(), inst.n, "cut vector has the wrong length");
    let mut coeffs: Vec<f64> = inst.a.iter().map(|ai| ai.quad_form(v)).collect();
    let mut rhs = inst.c.quad_form(v);
    let big = coeffs.iter().fold(rhs.abs(), |m, c| m.max(c.abs()));
    let mut scale_applied = 1.0;
    if big > CUT_SCALE_LIMIT {
        for c in coeffs.iter_mut() {
            *c /= big;
        }
        rhs /= big;
        scale_applied = big;
    }
    LinearCut { coeffs, rhs, origin: v.to_vec(), scale_applied }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorCheck {
    pub feasible: bool,
    pub lambda_min: f64,
}

pub fn verify_interior(inst: &SdpInstance, y: &[f64], eps: f64) -> Result<InteriorCheck, ModelError> {
    if y.len() != inst.k() {
        return Err(ModelError::DimensionMismatch { expected: inst.k(), got: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Ok(InteriorCheck { feasible: false, lambda_min: f64::NEG_INFINITY });
    }
    let x = assemble_slack(inst, y);
    let lambda_min = min_eigenpairs(&x, 1)?[0].value;
    let sdp_ok = lambda_min >= -eps * inst.c.max_abs().max(1.0);
    let lin_ok = inst.expanded.iter().all(|l| l.value(y) <= l.c + eps * l.c.abs().max(1.0));
    Ok(InteriorCheck { feasible: sdp_ok && lin_ok, lambda_min })
}

/// `max { t >= 0 : a^T (y_in + t d) <= c_a }` over all linear constraints.
pub fn linear_ratio_test(inst: &SdpInstance, y_in: &[f64], d: &[f64]) -> StepLength {
    let mut t = StepLength::Unbounded;
    for l in &inst.expanded {
        let rate = l.value(d);
        if rate > 0.0 {
            let room = (l.c - l.value(y_in)).max(0.0);
            t = t.min(StepLength::Finite(room / rate));
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub z: SymMatrix,
    pub objective: f64,
    /// One multiplier per cut, already divided by the cut's scale.
    pub multipliers: Vec<f64>,
}

impl DualCertificate {
    pub fn empty(n: usize) -> Self {
        Self { z: SymMatrix::zeros(n), objective: 0.0, multipliers: vec![] }
    }

    /// `max_i |A_i . Z - b_i|`.
    pub fn stationarity_residual(&self, inst: &SdpInstance) -> f64 {
        inst.a.iter().zip(&inst.b).map(|(ai, bi)| (ai.dot(&self.z) - bi).abs()).fold(0.0, f64::max)
    }

    pub fn lambda_min(&self) -> Result<f64, LinalgError> {
        Ok(min_eigenpairs(&self.z, 1)?[0].value)
    }
}

/// `Z = sum_d (gamma_d / scale_d) v_d v_d^T`.
pub fn build_dual_certificate(
    inst: &SdpInstance,
    cuts: &[LinearCut],
    gamma: &[f64],
) -> Result<DualCertificate, ModelError> {
    if cuts.len() != gamma.len() {
        return Err(ModelError::DimensionMismatch { expected: cuts.len(), got: gamma.len() });
    }
    let mut z = SymMatrix::zeros(inst.n);
    let mut multipliers = Vec::with_capacity(cuts.len());
    for (index, (cut, &g)) in cuts.iter().zip(gamma).enumerate() {
        if g < -1e-9 {
            return Err(ModelError::NegativeMultiplier { index, value: g });
        }
        let w = g.max(0.0) / cut.scale_applied;
        multipliers.push(w);
        if w != 0.0 {
            z.add_scaled(w, &SymMatrix::outer(&cut.origin));
        }
    }
    let objective = inst.c.dot(&z);
    Ok(DualCertificate { z, objective, multipliers })
}

/// `y + t d`.
pub fn along(y: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    y.iter().zip(d).map(|(y, d)| y + t * d).collect()
}

pub(crate) fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
