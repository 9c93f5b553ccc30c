//! Browser bindings for the solver: step-length projection, a small solve
//! with its bound trace, and generator spectra.
//!
//! Each export takes and returns JSON strings. The `*_json` functions hold
//! the logic so they can be exercised natively.

use pcsdp::driver::{pcp_solve, standard_cp_solve, SolverParams};
use pcsdp::generate::{generate_detailed, GenParams};
use pcsdp::linalg::{symmetric_eigenvalues, SymMatrix};
use pcsdp::projection::{min_eigenvalue_along, project_psd, ProjectionTolerances, StepLength};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest order accepted from the page.
const MAX_N: usize = 120;
const CURVE_POINTS: usize = 121;

fn matrix(v: &Value, key: &str) -> Result<SymMatrix, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.get(key).cloned().ok_or(format!("missing `{key}`"))?)
        .map_err(|e| format!("`{key}`: {e}"))?;
    SymMatrix::from_rows(&rows).map_err(|e| format!("`{key}`: {e}"))
}

fn step_json(t: StepLength) -> Value {
    match t {
        StepLength::Finite(t) => json!(t),
        StepLength::Unbounded => json!("inf"),
    }
}

/// `{"X": rows, "D": rows}` in; case, step, hit vectors and the curve
/// `t -> lambda_min(X + t D)` out.
pub fn project_json(input: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let (x, d) = (matrix(&v, "X")?, matrix(&v, "D")?);
    let o = project_psd(&x, &d, &ProjectionTolerances::default()).map_err(|e| e.to_string())?;
    let t_max = match o.t_star {
        StepLength::Finite(t) if t > 0.0 => 2.0 * t,
        _ => 2.0,
    };
    let mut curve = Vec::with_capacity(CURVE_POINTS);
    for i in 0..CURVE_POINTS {
        let t = t_max * i as f64 / (CURVE_POINTS - 1) as f64;
        let lam = min_eigenvalue_along(&x, &d, t).map_err(|e| e.to_string())?;
        curve.push(json!([t, lam]));
    }
    let hits: Vec<Vec<f64>> = o.hit_vectors.iter().map(|h| h.iter().copied().collect()).collect();
    Ok(json!({
        "case": o.case_label.as_str(),
        "t_star": step_json(o.t_star),
        "hit_vectors": hits,
        "curve": curve,
    })
    .to_string())
}

fn gen_params(family: &str, n: usize, k: usize, seed: u64) -> Result<GenParams, String> {
    if n == 0 || n > MAX_N || k == 0 || k > n {
        return Err(format!("need 1 <= k <= n <= {MAX_N}"));
    }
    match family {
        "first" => Ok(GenParams::first_family(n, k, seed)),
        "second" => Ok(GenParams::second_family(n, k, seed)),
        other => Err(format!("unknown family `{other}`")),
    }
}

/// Generates an instance and solves it; returns the bound trace.
pub fn solve_json(family: &str, n: usize, k: usize, seed: u64, method: &str) -> Result<String, String> {
    let inst = generate_detailed(&gen_params(family, n, k, seed)?).map_err(|e| e.to_string())?.instance;
    let params = SolverParams { gap_tol: 1e-6, ..SolverParams::default() };
    let res = match method {
        "pcp" => pcp_solve(&inst, &params),
        "cp" => standard_cp_solve(&inst, &SolverParams { max_iters: 20_000, ..params }),
        other => return Err(format!("unknown method `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    let num = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let trace: Vec<Value> = res
        .trace
        .iter()
        .map(|r| {
            json!({
                "iter": r.iter,
                "lb": num(r.lb),
                "ub": num(r.ub),
                "mode": r.mode.as_str(),
                "case": r.case_label.map(|c| c.as_str()),
            })
        })
        .collect();
    Ok(json!({
        "status": res.status.as_str(),
        "lb": num(res.lb),
        "ub": num(res.ub),
        "iterations": res.trace.len(),
        "cuts": res.trace.last().map_or(0, |r| r.cuts_total),
        "trace": trace,
    })
    .to_string())
}

/// Eigenvalues of `C` and each `A_i` plus the planted null counts.
pub fn spectra_json(family: &str, n: usize, k: usize, seed: u64) -> Result<String, String> {
    let g = generate_detailed(&gen_params(family, n, k, seed)?).map_err(|e| e.to_string())?;
    let eig = |m: &SymMatrix| symmetric_eigenvalues(m).map_err(|e| e.to_string());
    let a: Vec<Vec<f64>> = g.instance.a().iter().map(eig).collect::<Result<_, _>>()?;
    Ok(json!({
        "c": eig(g.instance.c())?,
        "a": a,
        "null_counts": g.null_counts,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn project(input: &str) -> Result<String, JsValue> {
    js(project_json(input))
}

#[wasm_bindgen]
pub fn solve(family: &str, n: usize, k: usize, seed: u32, method: &str) -> Result<String, JsValue> {
    js(solve_json(family, n, k, seed as u64, method))
}

#[wasm_bindgen]
pub fn spectra(family: &str, n: usize, k: usize, seed: u32) -> Result<String, JsValue> {
    js(spectra_json(family, n, k, seed as u64))
}
