//! Iteration logs (CSV or JSON lines) and the run summary.

use crate::driver::{IterationRecord, SolveResult};
use crate::model::SdpInstance;
use crate::projection::StepLength;
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for LogFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" | "json-lines" => Ok(LogFormat::JsonLines),
            _ => Err(format!("unknown log format `{s}` (expected csv or jsonl)")),
        }
    }
}

pub const CSV_HEADER: &str =
    "iter,wall_seconds,lb,ub,gap,t_star,case_label,mode,cuts_total,assemble_seconds,projection_seconds,master_lp_seconds";

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_step(t: Option<StepLength>) -> String {
    match t {
        None => String::new(),
        Some(StepLength::Unbounded) => "inf".into(),
        Some(StepLength::Finite(v)) => fmt_num(v),
    }
}

pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_num(r.wall_seconds),
            fmt_num(r.lb),
            fmt_num(r.ub),
            fmt_num(r.gap),
            fmt_step(r.t_star),
            r.case_label.map(|c| c.as_str()).unwrap_or(""),
            r.mode.as_str(),
            r.cuts_total,
            fmt_num(r.timings.assemble),
            fmt_num(r.timings.projection),
            fmt_num(r.timings.master_lp),
        );
    }
    out
}

/// Finite numbers as JSON numbers, everything else as `null`.
fn jnum(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

fn record_json(r: &IterationRecord) -> Value {
    let t_star = match r.t_star {
        None => Value::Null,
        Some(StepLength::Unbounded) => Value::String("inf".into()),
        Some(StepLength::Finite(v)) => jnum(v),
    };
    json!({
        "iter": r.iter,
        "wall_seconds": jnum(r.wall_seconds),
        "lb": jnum(r.lb),
        "ub": jnum(r.ub),
        "gap": jnum(r.gap),
        "t_star": t_star,
        "case_label": r.case_label.map(|c| c.as_str()),
        "mode": r.mode.as_str(),
        "cuts_total": r.cuts_total,
        "timings": {
            "assemble": jnum(r.timings.assemble),
            "projection": jnum(r.timings.projection),
            "master_lp": jnum(r.timings.master_lp),
        },
    })
}

pub fn trace_jsonl(trace: &[IterationRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&record_json(r).to_string());
        out.push('\n');
    }
    out
}

/// Residuals of the dual certificate against the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub lambda_min_z: f64,
    pub z_max_abs: f64,
    pub objective: f64,
    pub objective_gap: f64,
    pub stationarity: f64,
}

pub fn check_certificate(result: &SolveResult, inst: &SdpInstance) -> CertificateCheck {
    let cert = &result.certificate;
    CertificateCheck {
        lambda_min_z: cert.lambda_min().unwrap_or(f64::NAN),
        z_max_abs: cert.z.max_abs(),
        objective: cert.objective,
        objective_gap: (cert.objective - result.ub).abs(),
        stationarity: cert.stationarity_residual(inst),
    }
}

pub fn summary_json(result: &SolveResult, inst: &SdpInstance, method: &str) -> String {
    let chk = check_certificate(result, inst);
    let mut m = Map::new();
    m.insert("method".into(), json!(method));
    m.insert("status".into(), json!(result.status.as_str()));
    m.insert("lb".into(), jnum(result.lb));
    m.insert("ub".into(), jnum(result.ub));
    m.insert("gap".into(), jnum(result.gap()));
    m.insert("iterations".into(), json!(result.trace.len()));
    m.insert("cuts_total".into(), json!(result.trace.last().map(|r| r.cuts_total).unwrap_or(0)));
    m.insert(
        "y_best".into(),
        result.y_best.as_ref().map(|y| Value::Array(y.iter().map(|v| jnum(*v)).collect())).unwrap_or(Value::Null),
    );
    m.insert("box_active".into(), json!(result.box_active));
    m.insert("linear_active".into(), json!(result.linear_active));
    m.insert(
        "certificate".into(),
        json!({
            "objective": jnum(chk.objective),
            "objective_minus_ub": jnum(chk.objective_gap),
            "lambda_min_z": jnum(chk.lambda_min_z),
            "z_max_abs": jnum(chk.z_max_abs),
            "stationarity_residual": jnum(chk.stationarity),
        }),
    );
    m.insert("message".into(), json!(result.message));
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes `trace.csv` or `trace.jsonl` plus `summary.json` into `dir`.
pub fn emit_report(
    result: &SolveResult,
    inst: &SdpInstance,
    method: &str,
    dir: &Path,
    format: LogFormat,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (name, body) = match format {
        LogFormat::Csv => ("trace.csv", trace_csv(&result.trace)),
        LogFormat::JsonLines => ("trace.jsonl", trace_jsonl(&result.trace)),
    };
    let trace_path = dir.join(name);
    std::fs::write(&trace_path, body)?;
    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, summary_json(result, inst, method))?;
    Ok(vec![trace_path, summary_path])
}
