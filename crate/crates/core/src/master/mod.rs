//! Outer approximation of the feasible set and the master LP over it.

mod simplex;

pub use simplex::{DenseSimplex, LpBackend, LpError, LpStatus};

use crate::model::{LinearConstraint, LinearCut};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BOX_BOUND: f64 = 1e5;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MasterError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("box bound must be positive and finite")]
    BadBox,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub y_out: Vec<f64>,
    pub objective: f64,
    /// One multiplier per stored cut, in the cut's own (possibly scaled) units.
    pub cut_multipliers: Vec<f64>,
    pub linear_multipliers: Vec<f64>,
    /// Multiplier on `|y_i| <= B`, signed by which side binds.
    pub box_multipliers: Vec<f64>,
    pub box_active: Vec<bool>,
    pub status: LpStatus,
}

/// Box, linear constraints and accumulated cuts, with a warm LP engine.
pub struct OuterApprox<B: LpBackend = DenseSimplex> {
    k: usize,
    box_bound: f64,
    linear: Vec<LinearConstraint>,
    cuts: Vec<LinearCut>,
    canon: Vec<Vec<f64>>,
    backend: B,
}

impl OuterApprox<DenseSimplex> {
    pub fn new(k: usize, box_bound: f64, linear: &[LinearConstraint]) -> Result<Self, MasterError> {
        Self::with_backend(DenseSimplex::new(k), k, box_bound, linear)
    }
}

impl<B: LpBackend> OuterApprox<B> {
    pub fn with_backend(
        mut backend: B,
        k: usize,
        box_bound: f64,
        linear: &[LinearConstraint],
    ) -> Result<Self, MasterError> {
        if !(box_bound.is_finite() && box_bound > 0.0) {
            return Err(MasterError::BadBox);
        }
        let mut rows = Vec::with_capacity(2 * k + linear.len());
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            rows.push((e.clone(), box_bound));
            e[i] = -1.0;
            rows.push((e, box_bound));
        }
        for l in linear {
            if l.a.len() != k {
                return Err(MasterError::DimensionMismatch { expected: k, got: l.a.len() });
            }
            rows.push((l.a.clone(), l.c));
        }
        backend.load_rows(&rows)?;
        Ok(Self { k, box_bound, linear: linear.to_vec(), cuts: vec![], canon: vec![], backend })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn box_bound(&self) -> f64 {
        self.box_bound
    }

    pub fn cuts(&self) -> &[LinearCut] {
        &self.cuts
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Appends `cut` unless an equivalent half-space is already stored.
    pub fn add_cut(&mut self, cut: LinearCut) -> Result<bool, MasterError> {
        if cut.coeffs.len() != self.k {
            return Err(MasterError::DimensionMismatch { expected: self.k, got: cut.coeffs.len() });
        }
        let canon = canonical(&cut);
        let dup = self
            .canon
            .iter()
            .any(|c| c.iter().zip(&canon).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
        if dup {
            return Ok(false);
        }
        self.backend.load_rows(&[(cut.coeffs.clone(), cut.rhs)])?;
        self.canon.push(canon);
        self.cuts.push(cut);
        Ok(true)
    }

    pub fn solve_master(&mut self, b: &[f64]) -> Result<MasterSolution, MasterError> {
        if b.len() != self.k {
            return Err(MasterError::DimensionMismatch { expected: self.k, got: b.len() });
        }
        self.backend.set_objective(b)?;
        let status = self.backend.solve()?;
        let y_out = self.backend.primal();
        let g = self.backend.duals();
        let k = self.k;
        let box_multipliers = (0..k).map(|i| g[2 * i] - g[2 * i + 1]).collect();
        let lin_end = 2 * k + self.linear.len();
        let linear_multipliers = g[2 * k..lin_end].to_vec();
        let cut_multipliers = g[lin_end..].to_vec();
        let objective = b.iter().zip(&y_out).map(|(b, y)| b * y).sum();
        let box_active = y_out.iter().map(|y| y.abs() >= self.box_bound * (1.0 - 1e-7)).collect();
        Ok(MasterSolution { y_out, objective, cut_multipliers, linear_multipliers, box_multipliers, box_active, status })
    }
}

/// `(coeffs, rhs)` divided by its largest magnitude.
fn canonical(cut: &LinearCut) -> Vec<f64> {
    let mut v = cut.coeffs.clone();
    v.push(cut.rhs);
    let s = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    v
}

/// True iff some `|y_out_i| >= B - tol * B`.
pub fn box_active(sol: &MasterSolution, box_bound: f64, tol: f64) -> bool {
    sol.y_out.iter().any(|y| y.abs() >= box_bound - tol * box_bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(coeffs: &[f64], rhs: f64) -> LinearCut {
        LinearCut { coeffs: coeffs.to_vec(), rhs, origin: vec![], scale_applied: 1.0 }
    }

    #[test]
    fn no_cuts_hits_box() {
        let mut m = OuterApprox::new(2, DEFAULT_BOX_BOUND, &[]).unwrap();
        let sol = m.solve_master(&[1.0, 1.0]).unwrap();
        assert_eq!(sol.y_out, vec![1e5, 1e5]);
        assert_eq!(sol.box_active, vec![true, true]);
        assert!(box_active(&sol, DEFAULT_BOX_BOUND, 1e-7));
    }

    #[test]
    fn single_cut() {
        let mut m = OuterApprox::new(1, DEFAULT_BOX_BOUND, &[]).unwrap();
        assert!(m.add_cut(cut(&[1.0], 5.0)).unwrap());
        let sol = m.solve_master(&[1.0]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.y_out, vec![5.0]);
        assert_eq!(sol.cut_multipliers, vec![1.0]);
        assert!(!box_active(&sol, DEFAULT_BOX_BOUND, 1e-7));
    }

    #[test]
    fn dedup() {
        let mut m = OuterApprox::new(2, DEFAULT_BOX_BOUND, &[]).unwrap();
        assert!(m.add_cut(cut(&[1.0, 2.0], 3.0)).unwrap());
        assert!(!m.add_cut(cut(&[1.0, 2.0], 3.0)).unwrap());
        assert!(!m.add_cut(cut(&[0.5, 1.0], 1.5)).unwrap());
        assert!(m.add_cut(cut(&[1.0, 2.0], 3.5)).unwrap());
        assert_eq!(m.cuts().len(), 2);
        assert!(m.add_cut(cut(&[1.0], 3.0)).is_err());
    }

    #[test]
    fn box_flag_examples() {
        let mk = |y: Vec<f64>| MasterSolution {
            y_out: y,
            objective: 0.0,
            cut_multipliers: vec![],
            linear_multipliers: vec![],
            box_multipliers: vec![],
            box_active: vec![],
            status: LpStatus::Optimal,
        };
        assert!(box_active(&mk(vec![1e5, 3.0]), 1e5, 1e-7));
        assert!(!box_active(&mk(vec![3.0, 4.0]), 1e5, 1e-7));
        assert!(box_active(&mk(vec![1e5 * (1.0 - 1e-9), 0.0]), 1e5, 1e-7));
    }
}
