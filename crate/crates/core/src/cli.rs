//! Command-line front end: `generate`, `solve`, `project`, `verify`, `bench`.
//!
//! Exit codes: 0 converged (or check passed), 2 an iteration/time limit was
//! hit, 1 anything else.

use crate::driver::{
    pcp_solve_with_sink, standard_cp_solve_with_sink, NullSink, SolveResult, SolveStatus, SolverParams, VERIFY_EPS,
};
use crate::generate::{generate_instance, BMode, GenParams};
use crate::io::{self, LogFormat};
use crate::linalg::SymMatrix;
use crate::model::{verify_interior, SdpInstance};
use crate::projection::{project_psd, ProjectionTolerances, StepLength};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::Value;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "pcsdp", version, about = "Dense SDP solver using projective cutting planes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Solve an instance (.dat-s or native .json) and write a trace and summary.
    Solve(SolveArgs),
    /// Run the projection oracle once on a JSON file {"X": [[..]], "D": [[..]]}.
    Project(ProjectArgs),
    /// Check whether a point is feasible for an instance, up to a tolerance.
    Verify(VerifyArgs),
    /// Solve a grid of generated instances in parallel.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FileFormat {
    Sdpa,
    Native,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Pcp,
    Cp,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Pcp => "pcp",
            Method::Cp => "cp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LogArg {
    Csv,
    Jsonl,
}

impl From<LogArg> for LogFormat {
    fn from(l: LogArg) -> Self {
        match l {
            LogArg::Csv => LogFormat::Csv,
            LogArg::Jsonl => LogFormat::JsonLines,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct GenOverrides {
    #[arg(long, value_enum, default_value = "first")]
    family: Family,
    /// Number of shared null vectors (default k/2).
    #[arg(long)]
    shared_null: Option<usize>,
    /// Probability that a shared vector is planted in a given A_i.
    #[arg(long)]
    insert_prob: Option<f64>,
    /// Draw b uniformly from [0, 1] instead of all ones.
    #[arg(long)]
    random_b: bool,
    #[arg(long)]
    nonneg_y: bool,
}

impl GenOverrides {
    fn params(&self, n: usize, k: usize, seed: u64) -> GenParams {
        let mut p = match self.family {
            Family::First => GenParams::first_family(n, k, seed),
            Family::Second => GenParams::second_family(n, k, seed),
        };
        if let Some(s) = self.shared_null {
            p.shared_null_count = s;
        }
        if let Some(q) = self.insert_prob {
            p.insert_prob = q;
        }
        if self.random_b {
            p.b_mode = BMode::RandomUniform;
        }
        p.nonneg_y |= self.nonneg_y;
        p
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    gen: GenOverrides,
    /// Output format; defaults to native for .json paths, SDPA otherwise.
    #[arg(long, value_enum)]
    format: Option<FileFormat>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ParamOverrides {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    box_bound: Option<f64>,
    /// Add only the first hit vector per projection.
    #[arg(long)]
    single_hit: bool,
    #[arg(long)]
    eps_psd: Option<f64>,
}

impl ParamOverrides {
    fn params(&self) -> SolverParams {
        let mut p = SolverParams::default();
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.gap_tol {
            p.gap_tol = v;
        }
        if let Some(v) = self.max_iters {
            p.max_iters = v;
        }
        p.time_limit = self.time_limit.or(p.time_limit);
        if let Some(v) = self.box_bound {
            p.box_bound = v;
        }
        if self.single_hit {
            p.second_hit = false;
            p.tolerances.second_hit = false;
        }
        if let Some(v) = self.eps_psd {
            p.tolerances.eps_psd = v;
        }
        p
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pcp")]
    method: Method,
    #[arg(long, value_enum, default_value = "csv")]
    log: LogArg,
    /// Directory for the trace and summary.json (default: next to the input).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Starting point: a JSON array, or a summary.json with `y_best`.
    #[arg(long)]
    start: Option<PathBuf>,
    #[command(flatten)]
    params: ParamOverrides,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    input: PathBuf,
    /// Print the outcome as one JSON object.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    eps_psd: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    instance: PathBuf,
    /// A JSON array, or a summary.json with `y_best`.
    y: PathBuf,
    #[arg(long, default_value_t = VERIFY_EPS)]
    eps: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated sizes as NxK, for example 40x6,80x12.
    #[arg(long, value_delimiter = ',', default_value = "40x6,40x12,80x6,80x12")]
    sizes: Vec<String>,
    /// Seed range as A..B (half-open) or a comma-separated list.
    #[arg(long, default_value = "0..5")]
    seeds: String,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pcp,cp")]
    method: Vec<Method>,
    #[command(flatten)]
    gen: GenOverrides,
    #[command(flatten)]
    params: ParamOverrides,
    #[arg(long, value_enum, default_value = "csv")]
    log: LogArg,
    #[arg(short, long)]
    output: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Project(a) => cmd_project(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

type CmdResult = Result<i32, Box<dyn std::error::Error + Send + Sync>>;

fn status_code(s: SolveStatus) -> i32 {
    match s {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::IterLimit | SolveStatus::TimeLimit => EXIT_LIMIT,
        SolveStatus::Failed => EXIT_ERROR,
    }
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> CmdResult {
    let p = a.gen.params(a.n, a.k, a.seed);
    let inst = generate_instance(&p)?;
    let fmt = a.format.unwrap_or(if io::is_native_path(&a.output) { FileFormat::Native } else { FileFormat::Sdpa });
    let text = match fmt {
        FileFormat::Sdpa => io::write_sdpa(&inst),
        FileFormat::Native => io::write_native(&inst),
    };
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.output, text)?;
    writeln!(out, "wrote {} (n = {}, k = {})", a.output.display(), inst.n(), inst.k())?;
    Ok(EXIT_OK)
}

/// A point from a bare JSON array or an object carrying `y_best` / `y`.
fn read_point(path: &Path) -> Result<Vec<f64>, Box<dyn std::error::Error + Send + Sync>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let arr = match &v {
        Value::Array(_) => &v,
        Value::Object(m) => m
            .get("y_best")
            .or_else(|| m.get("y"))
            .ok_or_else(|| format!("{}: no `y_best` or `y` field", path.display()))?,
        _ => return Err(format!("{}: expected a JSON array", path.display()).into()),
    };
    let y: Vec<f64> =
        serde_json::from_value(arr.clone()).map_err(|e| format!("{}: point must be numbers: {e}", path.display()))?;
    Ok(y)
}

fn solve_one(inst: &SdpInstance, method: Method, params: &SolverParams) -> Result<SolveResult, crate::driver::DriverError> {
    match method {
        Method::Pcp => pcp_solve_with_sink(inst, params, &mut NullSink),
        Method::Cp => standard_cp_solve_with_sink(inst, params, &mut NullSink),
    }
}

fn summary_line(r: &SolveResult) -> String {
    format!(
        "status = {}  lb = {}  ub = {}  gap = {:.3e}  iters = {}",
        r.status.as_str(),
        io::report::fmt_num(r.lb),
        io::report::fmt_num(r.ub),
        r.gap(),
        r.trace.len()
    )
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write) -> CmdResult {
    let mut params = a.params.params();
    if let Some(s) = &a.start {
        params.start = Some(read_point(s)?);
    }
    params.validate()?;
    let outdir = match &a.output {
        Some(d) => d.clone(),
        None => {
            let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            a.input.with_file_name(format!("{stem}.{}", a.method.as_str()))
        }
    };
    let inst = io::read_instance(&a.input)?;
    let result = solve_one(&inst, a.method, &params)?;
    let files = io::emit_report(&result, &inst, a.method.as_str(), &outdir, a.log.into())?;
    writeln!(out, "{}", summary_line(&result))?;
    if let Some(m) = &result.message {
        writeln!(out, "note: {m}")?;
    }
    for f in files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(status_code(result.status))
}

fn cmd_project(a: ProjectArgs, out: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(&a.input).map_err(|e| format!("{}: {e}", a.input.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", a.input.display()))?;
    let get = |key: &str| -> Result<SymMatrix, Box<dyn std::error::Error + Send + Sync>> {
        let rows: Vec<Vec<f64>> = serde_json::from_value(v.get(key).cloned().ok_or(format!("missing `{key}`"))?)
            .map_err(|e| format!("`{key}` must be a list of rows: {e}"))?;
        SymMatrix::from_rows(&rows).map_err(|e| format!("`{key}`: {e}").into())
    };
    let (x, d) = (get("X")?, get("D")?);
    let mut tol = ProjectionTolerances::default();
    if let Some(e) = a.eps_psd {
        tol.eps_psd = e;
    }
    let o = project_psd(&x, &d, &tol)?;
    if a.json {
        let hits: Vec<Vec<f64>> = o.hit_vectors.iter().map(|h| h.iter().copied().collect()).collect();
        let t_star = match o.t_star {
            StepLength::Finite(t) => serde_json::json!(t),
            StepLength::Unbounded => serde_json::json!("inf"),
        };
        let j = serde_json::json!({
            "case": o.case_label.as_str(),
            "t_star": t_star,
            "hit_vectors": hits,
        });
        writeln!(out, "{j}")?;
    } else {
        writeln!(out, "case = {}", o.case_label)?;
        writeln!(out, "t* = {}", o.t_star)?;
        writeln!(out, "hits = {}", o.hit_vectors.len())?;
        for h in &o.hit_vectors {
            let s: Vec<String> = h.iter().map(|v| io::report::fmt_num(*v)).collect();
            writeln!(out, "v = [{}]", s.join(", "))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let inst = io::read_instance(&a.instance)?;
    let y = read_point(&a.y)?;
    let chk = verify_interior(&inst, &y, a.eps)?;
    writeln!(out, "feasible = {}", chk.feasible)?;
    writeln!(out, "lambda_min = {}", io::report::fmt_num(chk.lambda_min))?;
    writeln!(out, "objective = {}", io::report::fmt_num(inst.objective(&y)))?;
    Ok(if chk.feasible { EXIT_OK } else { EXIT_ERROR })
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (n, k) = s.trim().split_once('x').ok_or_else(|| format!("size `{s}` must look like 40x6"))?;
    let n = n.parse().map_err(|_| format!("bad n in `{s}`"))?;
    let k = k.parse().map_err(|_| format!("bad k in `{s}`"))?;
    Ok((n, k))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        return Ok((a..b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| format!("bad seed `{t}`"))).collect()
}

struct BenchRow {
    name: String,
    outcome: Result<SolveResult, String>,
    seconds: f64,
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> CmdResult {
    let sizes: Vec<(usize, usize)> = a.sizes.iter().map(|s| parse_size(s)).collect::<Result<_, _>>()?;
    let seeds = parse_seeds(&a.seeds)?;
    let params = a.params.params();
    params.validate()?;
    let mut jobs = vec![];
    for &(n, k) in &sizes {
        for &seed in &seeds {
            for &m in &a.method {
                jobs.push((n, k, seed, m));
            }
        }
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = a.jobs {
            b = b.num_threads(j);
        }
        b.build()?
    };
    let fmt: LogFormat = a.log.into();
    let family = format!("{:?}", a.gen.family).to_lowercase();
    let rows: Vec<BenchRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, k, seed, m)| {
                let name = format!("{family}-n{n}-k{k}-s{seed}-{}", m.as_str());
                let t0 = std::time::Instant::now();
                let outcome = (|| -> Result<SolveResult, String> {
                    let inst = generate_instance(&a.gen.params(n, k, seed)).map_err(|e| e.to_string())?;
                    let r = solve_one(&inst, m, &params).map_err(|e| e.to_string())?;
                    io::emit_report(&r, &inst, m.as_str(), &a.output.join(&name), fmt).map_err(|e| e.to_string())?;
                    Ok(r)
                })();
                BenchRow { name, outcome, seconds: t0.elapsed().as_secs_f64() }
            })
            .collect()
    });
    let mut code = EXIT_OK;
    writeln!(out, "{:<32} {:>10} {:>24} {:>10} {:>6} {:>9}", "run", "status", "ub", "gap", "iters", "seconds")?;
    for r in &rows {
        match &r.outcome {
            Ok(s) => {
                writeln!(
                    out,
                    "{:<32} {:>10} {:>24} {:>10.3e} {:>6} {:>9.3}",
                    r.name,
                    s.status.as_str(),
                    io::report::fmt_num(s.ub),
                    s.gap(),
                    s.trace.len(),
                    r.seconds
                )?;
                code = code.max(match status_code(s.status) {
                    EXIT_LIMIT => 1,
                    EXIT_ERROR => 2,
                    _ => 0,
                });
            }
            Err(e) => {
                writeln!(out, "{:<32} {:>10} {e}", r.name, "error")?;
                code = 2;
            }
        }
    }
    // Internal ranking 0 < limit < error, mapped back to exit codes.
    Ok(match code {
        0 => EXIT_OK,
        1 => EXIT_LIMIT,
        _ => EXIT_ERROR,
    })
}
