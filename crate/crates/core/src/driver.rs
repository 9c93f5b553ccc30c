//! Projective cutting planes and the plain separation baseline.
//!
//! Both loops keep an outer polytope whose LP optimum `y_out` gives the upper
//! bound. The projective loop also keeps a feasible interior point `y_in`,
//! projects along `y_out - y_in`, takes the pierce point as a lower bound and
//! the first-hit vector as the next cut.

use crate::linalg::{ldl_core_factor, min_eigenpairs};
use crate::master::{box_active, LpStatus, MasterError, MasterSolution, OuterApprox};
use crate::model::{
    along, assemble_direction, assemble_slack, build_dual_certificate, cut_from_vector, linear_ratio_test, to_vec,
    verify_interior, DualCertificate, ModelError, SdpInstance,
};
use crate::projection::{project_psd, CaseLabel, ProjectionError, ProjectionOutcome, ProjectionTolerances, StepLength};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use web_time::Instant;

/// Feasibility tolerance for pierce points and the returned `y_best`.
pub const VERIFY_EPS: f64 = 1e-7;
const BOX_TOL: f64 = 1e-7;
const STAGNATION_LIMIT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub alpha: f64,
    pub gap_tol: f64,
    /// Floor of the gap scale `max(gap_floor, |ub|)`.
    pub gap_floor: f64,
    pub box_bound: f64,
    pub max_iters: usize,
    pub second_hit: bool,
    pub tolerances: ProjectionTolerances,
    /// Relative eigenvalue tolerance for declaring a point feasible in separation.
    pub sep_tol: f64,
    pub time_limit: Option<f64>,
    /// Feasible starting point; `y = 0` when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            gap_tol: 1e-5,
            gap_floor: 1.0,
            box_bound: crate::master::DEFAULT_BOX_BOUND,
            max_iters: 5000,
            second_hit: true,
            tolerances: ProjectionTolerances::default(),
            sep_tol: 1e-7,
            time_limit: None,
            start: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DriverError::BadParams(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.gap_tol > 0.0 && self.gap_tol.is_finite()) {
            return Err(DriverError::BadParams("gap_tol must be positive".into()));
        }
        if !(self.gap_floor > 0.0 && self.gap_floor.is_finite()) {
            return Err(DriverError::BadParams("gap_floor must be positive".into()));
        }
        if !(self.sep_tol > 0.0 && self.sep_tol.is_finite()) {
            return Err(DriverError::BadParams("sep_tol must be positive".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(DriverError::BadParams("time_limit must be positive".into()));
            }
        }
        self.tolerances.validate().map_err(|e| DriverError::BadParams(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Separation while the master optimum touches the box.
    Bootstrap,
    Projective,
    /// Plain cutting planes.
    Separation,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bootstrap => "Bootstrap",
            Mode::Projective => "Projective",
            Mode::Separation => "Separation",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub assemble: f64,
    pub projection: f64,
    pub master_lp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub wall_seconds: f64,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub t_star: Option<StepLength>,
    pub case_label: Option<CaseLabel>,
    pub mode: Mode,
    pub timings: PhaseTimings,
    pub cuts_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterLimit,
    TimeLimit,
    Failed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::IterLimit => "IterLimit",
            SolveStatus::TimeLimit => "TimeLimit",
            SolveStatus::Failed => "Failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Best verified feasible point; `None` if none was found.
    pub y_best: Option<Vec<f64>>,
    pub lb: f64,
    pub ub: f64,
    pub certificate: DualCertificate,
    /// Whether the final master optimum touches the box or a linear constraint.
    pub box_active: bool,
    pub linear_active: bool,
    pub trace: Vec<IterationRecord>,
    pub message: Option<String>,
}

impl SolveResult {
    pub fn gap(&self) -> f64 {
        self.ub - self.lb
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("starting point is infeasible (lambda_min = {lambda_min:e})")]
    InfeasibleStart { lambda_min: f64 },
    #[error("bad solver parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Master(#[from] MasterError),
}

/// Receives each iteration as it completes.
pub trait IterationSink {
    fn record(&mut self, rec: &IterationRecord);
}

impl IterationSink for Vec<IterationRecord> {
    fn record(&mut self, rec: &IterationRecord) {
        self.push(rec.clone());
    }
}

pub struct NullSink;

impl IterationSink for NullSink {
    fn record(&mut self, _: &IterationRecord) {}
}

impl<F: FnMut(&IterationRecord)> IterationSink for F {
    fn record(&mut self, rec: &IterationRecord) {
        self(rec)
    }
}

pub fn pcp_solve(inst: &SdpInstance, params: &SolverParams) -> Result<SolveResult, DriverError> {
    pcp_solve_with_sink(inst, params, &mut NullSink)
}

pub fn standard_cp_solve(inst: &SdpInstance, params: &SolverParams) -> Result<SolveResult, DriverError> {
    standard_cp_solve_with_sink(inst, params, &mut NullSink)
}

struct Run<'a> {
    inst: &'a SdpInstance,
    params: &'a SolverParams,
    approx: OuterApprox,
    start: Instant,
    lb: f64,
    ub: f64,
    y_best: Option<Vec<f64>>,
    trace: Vec<IterationRecord>,
    last: Option<MasterSolution>,
    sep_scale: f64,
}

enum Step {
    Continue,
    Done(SolveStatus, Option<String>),
}

impl<'a> Run<'a> {
    fn new(inst: &'a SdpInstance, params: &'a SolverParams) -> Result<Self, DriverError> {
        params.validate()?;
        if let Some(s) = &params.start {
            if s.len() != inst.k() {
                return Err(DriverError::BadParams(format!("start has length {}, expected {}", s.len(), inst.k())));
            }
        }
        let approx = OuterApprox::new(inst.k(), params.box_bound, inst.linear_constraints())?;
        Ok(Self {
            inst,
            params,
            approx,
            start: Instant::now(),
            lb: f64::NEG_INFINITY,
            ub: f64::INFINITY,
            y_best: None,
            trace: vec![],
            last: None,
            sep_scale: inst.c().max_abs().max(1.0),
        })
    }

    fn start_point(&self) -> Vec<f64> {
        self.params.start.clone().unwrap_or_else(|| vec![0.0; self.inst.k()])
    }

    fn offer_feasible(&mut self, y: &[f64]) -> Result<bool, DriverError> {
        let value = self.inst.objective(y);
        if value <= self.lb {
            return Ok(false);
        }
        if verify_interior(self.inst, y, VERIFY_EPS)?.feasible {
            // Never above the valid upper bound.
            self.lb = value.min(self.ub);
            self.y_best = Some(y.to_vec());
            return Ok(true);
        }
        Ok(false)
    }

    fn master(&mut self, timings: &mut PhaseTimings) -> Result<MasterSolution, DriverError> {
        let t = Instant::now();
        let sol = self.approx.solve_master(self.inst.b())?;
        timings.master_lp += t.elapsed().as_secs_f64();
        if sol.status == LpStatus::Optimal {
            self.ub = self.ub.min(sol.objective);
        }
        self.last = Some(sol.clone());
        Ok(sol)
    }

    fn gap_closed(&self) -> bool {
        self.ub - self.lb <= self.params.gap_tol * self.params.gap_floor.max(self.ub.abs())
    }

    /// Adds cuts from the most negative eigenvectors of the slack at `y`.
    /// Returns `(feasible, accepted)`.
    fn separate(&mut self, y: &[f64], timings: &mut PhaseTimings) -> Result<(bool, usize), DriverError> {
        let t = Instant::now();
        let x = assemble_slack(self.inst, y);
        timings.assemble += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let count = if self.params.second_hit { 2.min(x.order()) } else { 1 };
        let pairs = min_eigenpairs(&x, count).map_err(ModelError::from)?;
        timings.projection += t.elapsed().as_secs_f64();
        let thr = -self.params.sep_tol * self.sep_scale;
        if pairs[0].value >= thr {
            return Ok((true, 0));
        }
        let mut accepted = 0;
        for p in pairs.iter().filter(|p| p.value < thr) {
            if self.approx.add_cut(cut_from_vector(self.inst, p.vector.as_slice()))? {
                accepted += 1;
            }
        }
        Ok((false, accepted))
    }

    fn add_hits(&mut self, hits: &[DVector<f64>]) -> Result<usize, DriverError> {
        let mut accepted = 0;
        for v in hits {
            if self.approx.add_cut(cut_from_vector(self.inst, &to_vec(v)))? {
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    fn push(
        &mut self,
        sink: &mut dyn IterationSink,
        iter: usize,
        mode: Mode,
        t_star: Option<StepLength>,
        case_label: Option<CaseLabel>,
        timings: PhaseTimings,
    ) {
        let rec = IterationRecord {
            iter,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            lb: self.lb,
            ub: self.ub,
            gap: self.ub - self.lb,
            t_star,
            case_label,
            mode,
            timings,
            cuts_total: self.approx.cuts().len(),
        };
        sink.record(&rec);
        self.trace.push(rec);
    }

    fn limits(&self, iter: usize) -> Option<SolveStatus> {
        if iter >= self.params.max_iters {
            return Some(SolveStatus::IterLimit);
        }
        if let Some(limit) = self.params.time_limit {
            if self.start.elapsed().as_secs_f64() >= limit {
                return Some(SolveStatus::TimeLimit);
            }
        }
        None
    }

    fn finish(self, status: SolveStatus, message: Option<String>) -> Result<SolveResult, DriverError> {
        let (certificate, box_on, linear_on) = match &self.last {
            Some(sol) if sol.status == LpStatus::Optimal => {
                // Cuts added after the last master solve carry zero weight.
                let mut gamma = sol.cut_multipliers.clone();
                gamma.resize(self.approx.cuts().len(), 0.0);
                let cert = build_dual_certificate(self.inst, self.approx.cuts(), &gamma)?;
                let linear_on = sol.linear_multipliers.iter().any(|g| *g > 1e-9);
                (cert, box_active(sol, self.params.box_bound, BOX_TOL), linear_on)
            }
            _ => (DualCertificate::empty(self.inst.n()), false, false),
        };
        Ok(SolveResult {
            status,
            y_best: self.y_best,
            lb: self.lb,
            ub: self.ub,
            certificate,
            box_active: box_on,
            linear_active: linear_on,
            trace: self.trace,
            message,
        })
    }
}

pub fn pcp_solve_with_sink(
    inst: &SdpInstance,
    params: &SolverParams,
    sink: &mut dyn IterationSink,
) -> Result<SolveResult, DriverError> {
    let mut run = Run::new(inst, params)?;
    let mut y_in = run.start_point();
    let check = verify_interior(inst, &y_in, VERIFY_EPS)?;
    if !check.feasible {
        return Err(DriverError::InfeasibleStart { lambda_min: check.lambda_min });
    }
    run.lb = inst.objective(&y_in);
    run.y_best = Some(y_in.clone());
    let mut tol = params.tolerances.clone();
    tol.second_hit = params.second_hit;

    let mut idle = 0usize;
    let mut iter = 0usize;
    loop {
        iter += 1;
        let mut timings = PhaseTimings::default();
        let sol = run.master(&mut timings)?;
        if sol.status != LpStatus::Optimal {
            let msg = format!("master LP reported {:?}", sol.status);
            run.push(sink, iter, Mode::Bootstrap, None, None, timings);
            return run.finish(SolveStatus::Failed, Some(msg));
        }
        let y_out = sol.y_out.clone();

        let step = if box_active(&sol, params.box_bound, BOX_TOL) {
            let (feasible, accepted) = run.separate(&y_out, &mut timings)?;
            if feasible {
                run.offer_feasible(&y_out)?;
            }
            run.push(sink, iter, Mode::Bootstrap, None, None, timings);
            if feasible {
                if run.gap_closed() {
                    Step::Done(SolveStatus::Converged, None)
                } else {
                    Step::Done(SolveStatus::Failed, Some("box-bound optimum is feasible but not verified".into()))
                }
            } else {
                idle = if accepted == 0 { idle + 1 } else { 0 };
                Step::Continue
            }
        } else {
            let t = Instant::now();
            let d: Vec<f64> = y_out.iter().zip(&y_in).map(|(o, i)| o - i).collect();
            let x = assemble_slack(inst, &y_in);
            let dm = assemble_direction(inst, &y_in, &y_out);
            timings.assemble += t.elapsed().as_secs_f64();
            let t_lin = linear_ratio_test(inst, &y_in, &d);

            let t = Instant::now();
            let outcome = project_psd(&x, &dm, &tol);
            timings.projection += t.elapsed().as_secs_f64();

            match outcome {
                Ok(out) => {
                    let step = projective_step(&mut run, &mut y_in, &y_out, &d, t_lin, &out, &mut timings)?;
                    run.push(sink, iter, Mode::Projective, Some(out.t_star), Some(out.case_label), timings);
                    match step {
                        ProjStep::Converged => Step::Done(SolveStatus::Converged, None),
                        ProjStep::Cuts(accepted) => {
                            idle = if accepted == 0 { idle + 1 } else { 0 };
                            Step::Continue
                        }
                    }
                }
                Err(ProjectionError::CaseDUnresolved) => {
                    let (feasible, accepted) = run.separate(&y_out, &mut timings)?;
                    if feasible {
                        run.offer_feasible(&y_out)?;
                    }
                    run.push(sink, iter, Mode::Projective, None, None, timings);
                    idle = if accepted == 0 && !feasible { idle + 1 } else { 0 };
                    Step::Continue
                }
                Err(e) => {
                    run.push(sink, iter, Mode::Projective, None, None, timings);
                    return run.finish(SolveStatus::Failed, Some(e.to_string()));
                }
            }
        };

        match step {
            Step::Done(status, msg) => return run.finish(status, msg),
            Step::Continue => {}
        }
        if run.gap_closed() {
            return run.finish(SolveStatus::Converged, None);
        }
        if idle >= STAGNATION_LIMIT {
            return run.finish(SolveStatus::Failed, Some("stagnation: no new cut in consecutive iterations".into()));
        }
        if let Some(status) = run.limits(iter) {
            return run.finish(status, None);
        }
    }
}

enum ProjStep {
    Converged,
    Cuts(usize),
}

fn projective_step(
    run: &mut Run<'_>,
    y_in: &mut Vec<f64>,
    y_out: &[f64],
    d: &[f64],
    t_lin: StepLength,
    out: &ProjectionOutcome,
    timings: &mut PhaseTimings,
) -> Result<ProjStep, DriverError> {
    let t_star = out.t_star.min(t_lin).value().min(1.0);
    if t_star >= 1.0 {
        // The master optimum is itself feasible, unless verification disagrees.
        run.offer_feasible(y_out)?;
        if run.gap_closed() {
            return Ok(ProjStep::Converged);
        }
        return Ok(ProjStep::Cuts(run.separate(y_out, timings)?.1));
    }
    if out.case_label == CaseLabel::DTricky {
        let (feasible, mut accepted) = run.separate(y_out, timings)?;
        if feasible {
            run.offer_feasible(y_out)?;
        }
        accepted += recover_interior(run, y_in, d, timings)?;
        return Ok(ProjStep::Cuts(accepted));
    }
    let mut accepted = run.add_hits(&out.hit_vectors)?;
    if accepted == 0 && out.hit_vectors.is_empty() {
        // Finite step without a certificate: separate the outer point.
        accepted = run.separate(y_out, timings)?.1;
    }
    if t_star > 0.0 {
        let pierce = along(y_in, t_star, d);
        run.offer_feasible(&pierce)?;
        advance(run, y_in, run.params.alpha * t_star, d);
    } else {
        accepted += recover_interior(run, y_in, d, timings)?;
    }
    Ok(ProjStep::Cuts(accepted))
}

/// `y_in <- y_in + step * d`, shrinking the step if roundoff would leave the
/// cone that the next projection factors. Returns whether it moved.
fn advance(run: &Run<'_>, y_in: &mut Vec<f64>, step: f64, d: &[f64]) -> bool {
    for shrink in [1.0, 0.25, 0.0625] {
        let cand = along(y_in, shrink * step, d);
        if ldl_core_factor(&assemble_slack(run.inst, &cand), run.params.tolerances.eps_core).is_ok() {
            *y_in = cand;
            return true;
        }
    }
    false
}

/// The inner point lies on the boundary and every ray towards the outer
/// point exits at once. Step instead along the inward normal of the cuts
/// tight at `y_in` (all of which pass through it), which enters the cone
/// whenever those cuts approximate its tangent cone. Returns accepted cuts.
fn recover_interior(
    run: &mut Run<'_>,
    y_in: &mut Vec<f64>,
    d: &[f64],
    timings: &mut PhaseTimings,
) -> Result<usize, DriverError> {
    let k = y_in.len();
    let mut dir = vec![0.0; k];
    let mut tight = 0;
    for cut in run.approx.cuts() {
        let norm = cut.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if norm == 0.0 {
            continue;
        }
        let slack = cut.rhs - cut.coeffs.iter().zip(y_in.iter()).map(|(a, y)| a * y).sum::<f64>();
        if slack.abs() <= 1e-7 * norm.max(cut.rhs.abs()).max(1.0) {
            tight += 1;
            for (di, a) in dir.iter_mut().zip(&cut.coeffs) {
                *di -= a / norm;
            }
        }
    }
    let dir_norm = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if tight == 0 || dir_norm == 0.0 {
        return Ok(0);
    }
    let d_norm = d.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-3);
    for v in dir.iter_mut() {
        *v *= d_norm / dir_norm;
    }
    let t = Instant::now();
    let x = assemble_slack(run.inst, y_in);
    let target = along(y_in, 1.0, &dir);
    let dm = assemble_direction(run.inst, y_in, &target);
    let t_lin = linear_ratio_test(run.inst, y_in, &dir);
    timings.assemble += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let mut tol = run.params.tolerances.clone();
    tol.second_hit = run.params.second_hit;
    let outcome = project_psd(&x, &dm, &tol);
    timings.projection += t.elapsed().as_secs_f64();
    let Ok(out) = outcome else { return Ok(0) };
    let step = out.t_star.min(t_lin).value().min(1.0);
    let accepted = run.add_hits(&out.hit_vectors)?;
    if step > 0.0 {
        advance(run, y_in, run.params.alpha * step, &dir);
    }
    Ok(accepted)
}

pub fn standard_cp_solve_with_sink(
    inst: &SdpInstance,
    params: &SolverParams,
    sink: &mut dyn IterationSink,
) -> Result<SolveResult, DriverError> {
    let mut run = Run::new(inst, params)?;
    let y0 = run.start_point();
    if verify_interior(inst, &y0, VERIFY_EPS)?.feasible {
        run.lb = inst.objective(&y0);
        run.y_best = Some(y0);
    }
    let mut idle = 0usize;
    let mut iter = 0usize;
    loop {
        iter += 1;
        let mut timings = PhaseTimings::default();
        let sol = run.master(&mut timings)?;
        if sol.status != LpStatus::Optimal {
            let msg = format!("master LP reported {:?}", sol.status);
            run.push(sink, iter, Mode::Separation, None, None, timings);
            return run.finish(SolveStatus::Failed, Some(msg));
        }
        let (feasible, accepted) = run.separate(&sol.y_out, &mut timings)?;
        if feasible {
            run.offer_feasible(&sol.y_out)?;
        }
        run.push(sink, iter, Mode::Separation, None, None, timings);
        if feasible {
            let status = if run.gap_closed() { SolveStatus::Converged } else { SolveStatus::Failed };
            let msg = (status == SolveStatus::Failed).then(|| "separation found no cut but the point failed verification".into());
            return run.finish(status, msg);
        }
        if run.gap_closed() {
            return run.finish(SolveStatus::Converged, None);
        }
        idle = if accepted == 0 { idle + 1 } else { 0 };
        if idle >= STAGNATION_LIMIT {
            return run.finish(SolveStatus::Failed, Some("stagnation: no new cut in consecutive iterations".into()));
        }
        if let Some(status) = run.limits(iter) {
            return run.finish(status, None);
        }
    }
}
