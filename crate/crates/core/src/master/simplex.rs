//! Dense revised simplex behind a small LP port.
//!
//! The master `max b^T y s.t. a_j^T y <= c_j` is solved through its dual
//! `min c^T g s.t. sum_j g_j a_j = b, g >= 0`: one equality row per variable
//! and one column per master row. A basis of bound rows `sign(b_i) e_i` is
//! always feasible, the simplex multipliers are the master primal `y`, and
//! adding a row only adds a column, so the previous basis stays feasible and
//! the next solve starts where the last one stopped.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    /// The master rows admit no point.
    Infeasible,
    Unbounded,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row has {got} coefficients, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no bound row available to start from for variable {0}")]
    NoStartingBasis(usize),
    #[error("simplex stalled after {0} pivots")]
    NumericalStall(usize),
    #[error("basis matrix became singular")]
    SingularBasis,
}

/// Minimal interface the master needs from an LP engine.
pub trait LpBackend {
    /// Appends rows `a^T y <= c`.
    fn load_rows(&mut self, rows: &[(Vec<f64>, f64)]) -> Result<(), LpError>;
    fn set_objective(&mut self, b: &[f64]) -> Result<(), LpError>;
    fn solve(&mut self) -> Result<LpStatus, LpError>;
    fn status(&self) -> Option<LpStatus>;
    fn primal(&self) -> Vec<f64>;
    /// Row multipliers, one per loaded row.
    fn duals(&self) -> Vec<f64>;
    fn row_count(&self) -> usize;
}

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_LIMIT: usize = 50;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    k: usize,
    cols: Vec<Vec<f64>>,
    cost: Vec<f64>,
    scale: Vec<f64>,
    /// Rows with all-zero coefficients never enter the basis.
    empty: Vec<bool>,
    b: Vec<f64>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    x_b: Vec<f64>,
    y: Vec<f64>,
    status: Option<LpStatus>,
    since_refactor: usize,
    pub pivots_total: usize,
}

impl DenseSimplex {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            cols: vec![],
            cost: vec![],
            scale: vec![],
            empty: vec![],
            b: vec![],
            basis: vec![],
            binv: DMatrix::zeros(0, 0),
            x_b: vec![],
            y: vec![0.0; k],
            status: None,
            since_refactor: 0,
            pivots_total: 0,
        }
    }

    fn crash_basis(&mut self) -> Result<(), LpError> {
        let k = self.k;
        let mut basis = Vec::with_capacity(k);
        for i in 0..k {
            let want = if self.b[i] >= 0.0 { 1.0 } else { -1.0 };
            let found = (0..self.cols.len()).find(|&j| {
                let c = &self.cols[j];
                c[i] == want && c.iter().enumerate().all(|(r, v)| r == i || *v == 0.0)
            });
            basis.push(found.ok_or(LpError::NoStartingBasis(i))?);
        }
        self.basis = basis;
        self.refactor()?;
        Ok(())
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let k = self.k;
        let bm = DMatrix::from_fn(k, k, |r, c| self.cols[self.basis[c]][r]);
        self.binv = bm.try_inverse().ok_or(LpError::SingularBasis)?;
        self.x_b = (0..k).map(|r| (0..k).map(|i| self.binv[(r, i)] * self.b[i]).sum::<f64>()).collect();
        for v in self.x_b.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL * 1e3 {
                *v = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn compute_y(&mut self) {
        let k = self.k;
        for i in 0..k {
            self.y[i] = (0..k).map(|r| self.binv[(r, i)] * self.cost[self.basis[r]]).sum();
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.cols[j].iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>()
    }

    fn entering(&self, bland: bool, is_basic: &[bool]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols.len() {
            if is_basic[j] || self.empty[j] {
                continue;
            }
            let rc = self.reduced_cost(j);
            if rc < -FEAS_TOL * self.cost[j].abs().max(1.0) {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |(_, b)| rc < b) {
                    best = Some((j, rc));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let k = self.k;
        if self.empty.iter().zip(&self.cost).any(|(&e, &c)| e && c < -FEAS_TOL) {
            return Ok(LpStatus::Infeasible);
        }
        let limit = 50_000 + 20 * self.cols.len();
        let mut degenerate_run = 0usize;
        let mut is_basic = vec![false; self.cols.len()];
        for &j in &self.basis {
            is_basic[j] = true;
        }
        let mut pivots = 0usize;
        let mut verified = false;
        loop {
            self.compute_y();
            let bland = degenerate_run > DEGENERATE_LIMIT;
            let Some(q) = self.entering(bland, &is_basic) else {
                if verified || self.since_refactor == 0 {
                    return Ok(LpStatus::Optimal);
                }
                // Re-check from a fresh factorization before declaring optimality.
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;
            let w: Vec<f64> =
                (0..k).map(|r| (0..k).map(|i| self.binv[(r, i)] * self.cols[q][i]).sum::<f64>()).collect();
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..k {
                if w[r] > PIVOT_TOL {
                    let ratio = self.x_b[r].max(0.0) / w[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lt)) => {
                            if ratio < lt - 1e-12 * lt.abs().max(1.0) {
                                true
                            } else if ratio <= lt + 1e-12 * lt.abs().max(1.0) {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    w[r] > w[lr]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, theta)) = leave else {
                return Ok(LpStatus::Infeasible);
            };
            if theta <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for i in 0..k {
                self.x_b[i] -= theta * w[i];
            }
            self.x_b[r] = theta;
            let piv = w[r];
            for c in 0..k {
                self.binv[(r, c)] /= piv;
            }
            for i in 0..k {
                if i != r && w[i] != 0.0 {
                    let f = w[i];
                    for c in 0..k {
                        let v = self.binv[(r, c)];
                        self.binv[(i, c)] -= f * v;
                    }
                }
            }
            is_basic[self.basis[r]] = false;
            is_basic[q] = true;
            self.basis[r] = q;
            for v in self.x_b.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            pivots += 1;
            self.pivots_total += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            if pivots > limit {
                return Err(LpError::NumericalStall(pivots));
            }
        }
    }
}

impl LpBackend for DenseSimplex {
    fn load_rows(&mut self, rows: &[(Vec<f64>, f64)]) -> Result<(), LpError> {
        for (a, c) in rows {
            if a.len() != self.k {
                return Err(LpError::DimensionMismatch { expected: self.k, got: a.len() });
            }
            let s = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if s == 0.0 {
                self.cols.push(a.clone());
                self.cost.push(*c);
                self.scale.push(1.0);
                self.empty.push(true);
            } else {
                self.cols.push(a.iter().map(|v| v / s).collect());
                self.cost.push(c / s);
                self.scale.push(s);
                self.empty.push(false);
            }
        }
        self.status = None;
        Ok(())
    }

    fn set_objective(&mut self, b: &[f64]) -> Result<(), LpError> {
        if b.len() != self.k {
            return Err(LpError::DimensionMismatch { expected: self.k, got: b.len() });
        }
        if self.b.as_slice() != b || self.basis.is_empty() {
            self.b = b.to_vec();
            self.basis.clear();
        }
        self.status = None;
        Ok(())
    }

    fn solve(&mut self) -> Result<LpStatus, LpError> {
        if self.basis.is_empty() {
            self.crash_basis()?;
        }
        let status = self.run()?;
        self.status = Some(status);
        Ok(status)
    }

    fn status(&self) -> Option<LpStatus> {
        self.status
    }

    fn primal(&self) -> Vec<f64> {
        self.y.clone()
    }

    fn duals(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.cols.len()];
        for (r, &j) in self.basis.iter().enumerate() {
            g[j] = self.x_b[r] / self.scale[j];
        }
        g
    }

    fn row_count(&self) -> usize {
        self.cols.len()
    }
}
