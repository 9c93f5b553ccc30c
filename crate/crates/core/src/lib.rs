//! Dense semidefinite programming by projective cutting planes.
//!
//! The solver handles `max b^T y  s.t.  C - sum_i A_i y_i >= 0` (plus linear
//! inequalities) by keeping an outer polytope of linear cuts and a feasible
//! interior point. Each iteration projects from the interior point towards
//! the polytope optimum, finds the exact step to the PSD boundary, and adds
//! the first-hit cut.

pub mod cli;
pub mod driver;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod master;
pub mod model;
pub mod projection;
