//! Acceptance criteria 1 to 10. Each test prints one `criterion N: PASS|FAIL`
//! line (visible with `--nocapture`) before asserting.

mod common;

use common::{pair_for_case, quad, random_orthogonal, rng};
use nalgebra::DMatrix;
use pcsdp::driver::{pcp_solve, standard_cp_solve, SolveResult, SolveStatus, SolverParams, VERIFY_EPS};
use pcsdp::generate::{generate_detailed, generate_instance, GenParams};
use pcsdp::io::{emit_report, parse_sdpa, write_sdpa, LogFormat};
use pcsdp::linalg::{min_eigenpairs, symmetric_eigenvalues, SymMatrix};
use pcsdp::model::{verify_interior, SdpInstance};
use pcsdp::projection::{
    bisection_reference, project_psd, CaseLabel, ProjectionOutcome, ProjectionTolerances, StepLength,
};
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

/// Written straight to stderr so the line shows without `--nocapture`.
fn report(n: u32, ok: bool, detail: &str) {
    use std::io::Write;
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

// ---------------------------------------------------------------- oracle set

struct OracleCase {
    x: SymMatrix,
    d: SymMatrix,
    outcome: Result<ProjectionOutcome, String>,
    reference: StepLength,
}

struct OracleSet {
    cases: Vec<OracleCase>,
    seconds: f64,
}

const PAIRS_PER_CASE: usize = 80;
const BISECTION_EPS: f64 = 1e-13;
const BISECTION_CAP: f64 = 1e6;

fn oracle_set() -> &'static OracleSet {
    static SET: OnceLock<OracleSet> = OnceLock::new();
    SET.get_or_init(|| {
        let t0 = Instant::now();
        let tol = ProjectionTolerances::default();
        let mut cases = vec![];
        for (ci, case) in CaseLabel::ALL.into_iter().enumerate() {
            let mut r = rng(1_000 + ci as u64);
            for i in 0..PAIRS_PER_CASE {
                let n = 2 + i % 9;
                let (x, d) = pair_for_case(case, n, &mut r);
                let outcome = project_psd(&x, &d, &tol).map_err(|e| e.to_string());
                let reference = bisection_reference(&x, &d, BISECTION_CAP, BISECTION_EPS);
                cases.push(OracleCase { x, d, outcome, reference });
            }
        }
        OracleSet { cases, seconds: t0.elapsed().as_secs_f64() }
    })
}

#[test]
fn criterion_01_projection_matches_bisection() {
    let set = oracle_set();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bad = vec![];
    let mut worst = 0.0_f64;
    for (i, c) in set.cases.iter().enumerate() {
        let o = match &c.outcome {
            Ok(o) => o,
            Err(e) => {
                bad.push(format!("pair {i}: oracle error {e}"));
                continue;
            }
        };
        *counts.entry(o.case_label.as_str()).or_default() += 1;
        match (o.t_star, c.reference) {
            (StepLength::Unbounded, StepLength::Unbounded) => {}
            (StepLength::Finite(t), StepLength::Finite(r)) => {
                let err = (t - r).abs();
                worst = worst.max(err / 1.0_f64.max(t));
                if err > 1e-6_f64.max(1e-6 * t) {
                    bad.push(format!("pair {i} ({}): t* = {t}, bisection = {r}", o.case_label));
                }
            }
            (a, b) => bad.push(format!("pair {i} ({}): t* = {a}, bisection = {b}", o.case_label)),
        }
    }
    let min_count = CaseLabel::ALL.iter().map(|l| counts.get(l.as_str()).copied().unwrap_or(0)).min().unwrap();
    let ok = bad.is_empty() && set.cases.len() >= 500 && min_count >= 30 && set.seconds < 30.0;
    report(
        1,
        ok,
        &format!(
            "{} pairs, per-case {:?}, worst relative error {worst:.2e}, {:.2}s, {} mismatches",
            set.cases.len(),
            counts,
            set.seconds,
            bad.len()
        ),
    );
    assert!(bad.is_empty(), "mismatches:\n{}", bad.join("\n"));
    assert!(set.cases.len() >= 500);
    assert!(min_count >= 30, "case counts {counts:?}");
    assert!(set.seconds < 30.0, "took {}s", set.seconds);
}

#[test]
fn criterion_02_hit_vector_certificates() {
    let set = oracle_set();
    let mut bad = vec![];
    let mut checked = 0;
    for (i, c) in set.cases.iter().enumerate() {
        let Ok(o) = &c.outcome else { continue };
        let StepLength::Finite(t) = o.t_star else { continue };
        if o.hit_vectors.is_empty() && o.case_label != CaseLabel::DTricky {
            bad.push(format!("pair {i} ({}): finite t* without a hit vector", o.case_label));
        }
        let scale = o.scale(&c.x, &c.d);
        // The first vector certifies t*; a second one (from the next negative
        // eigenvalue) is an extra cut and only needs a descending slope.
        for (j, v) in o.hit_vectors.iter().enumerate() {
            checked += 1;
            let v = v.as_slice();
            let residual = quad(&c.x, v) + t * quad(&c.d, v);
            let slope = quad(&c.d, v);
            if (j == 0 && residual.abs() > 1e-6 * scale) || slope > -1e-8 * scale {
                bad.push(format!("pair {i} ({}) vector {j}: residual {residual:e}, slope {slope:e}", o.case_label));
            }
        }
    }
    report(2, bad.is_empty(), &format!("{checked} hit vectors checked, {} violations", bad.len()));
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn criterion_03_tricky_example() {
    let x = SymMatrix::from_diagonal(&[1.0, 0.0]);
    let d = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let o = project_psd(&x, &d, &ProjectionTolerances::default()).unwrap();
    let ok = o.t_star == StepLength::Finite(0.0) && o.hit_vectors.is_empty() && o.case_label == CaseLabel::DTricky;
    report(3, ok, &format!("t* = {}, case {}, {} hit vectors", o.t_star, o.case_label, o.hit_vectors.len()));
    assert!(ok);
}

// ---------------------------------------------------------- end-to-end runs

struct Run {
    name: String,
    inst: SdpInstance,
    pcp: SolveResult,
    pcp_seconds: f64,
    cp: SolveResult,
}

fn params() -> SolverParams {
    // The absolute target ub - lb <= 1e-5 is checked directly; a relative
    // tolerance of 1e-6 reaches it for objectives of order 1 to 10.
    SolverParams { gap_tol: 1e-6, ..SolverParams::default() }
}

fn runs() -> &'static Vec<Run> {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut out = vec![];
        for (n, k) in [(40, 6), (40, 12), (80, 6), (80, 12)] {
            for seed in 0..5u64 {
                let inst = generate_instance(&GenParams::first_family(n, k, seed)).unwrap();
                let t0 = Instant::now();
                let pcp = pcp_solve(&inst, &params()).unwrap();
                let pcp_seconds = t0.elapsed().as_secs_f64();
                let cp = standard_cp_solve(&inst, &SolverParams { max_iters: 20_000, ..params() }).unwrap();
                out.push(Run { name: format!("n{n}-k{k}-s{seed}"), inst, pcp, pcp_seconds, cp });
            }
        }
        out
    })
}

#[test]
fn criterion_04_pcp_converges() {
    let mut bad = vec![];
    let mut worst_gap = 0.0_f64;
    let mut slowest = 0.0_f64;
    for r in runs() {
        let gap = r.pcp.ub - r.pcp.lb;
        worst_gap = worst_gap.max(gap);
        slowest = slowest.max(r.pcp_seconds);
        let verified = r
            .pcp
            .y_best
            .as_ref()
            .map(|y| verify_interior(&r.inst, y, VERIFY_EPS).unwrap().feasible)
            .unwrap_or(false);
        if r.pcp.status != SolveStatus::Converged
            || !(gap <= 1e-5)
            || r.pcp.trace.len() > 5000
            || !verified
            || r.pcp_seconds >= 60.0
        {
            bad.push(format!(
                "{}: {:?} gap {gap:e} iters {} verified {verified} {:.1}s",
                r.name,
                r.pcp.status,
                r.pcp.trace.len(),
                r.pcp_seconds
            ));
        }
    }
    report(
        4,
        bad.is_empty(),
        &format!("{} runs, worst ub - lb {worst_gap:.2e}, slowest {slowest:.2}s", runs().len()),
    );
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn criterion_05_pcp_agrees_with_cp() {
    let mut bad = vec![];
    let mut worst = 0.0_f64;
    for r in runs() {
        let diff = (r.pcp.ub - r.cp.ub).abs();
        let rel = diff / 1.0_f64.max(r.cp.ub.abs());
        worst = worst.max(rel);
        if r.cp.status != SolveStatus::Converged || rel > 1e-4 {
            bad.push(format!("{}: pcp {} cp {} ({:?})", r.name, r.pcp.ub, r.cp.ub, r.cp.status));
        }
    }
    report(5, bad.is_empty(), &format!("worst relative difference {worst:.2e}"));
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn criterion_06_dual_certificate() {
    let mut bad = vec![];
    let mut checked = 0;
    for r in runs() {
        for (label, res) in [("pcp", &r.pcp), ("cp", &r.cp)] {
            if res.status != SolveStatus::Converged || res.box_active {
                continue;
            }
            checked += 1;
            let z = &res.certificate.z;
            let lam = min_eigenpairs(z, 1).unwrap()[0].value;
            let cz = r.inst.c().dot(z);
            let stat = r
                .inst
                .a()
                .iter()
                .zip(r.inst.b())
                .map(|(a, b)| (a.dot(z) - b).abs())
                .fold(0.0, f64::max);
            if lam < -1e-7 * z.max_abs() || (cz - res.ub).abs() > 1e-5 * 1.0_f64.max(res.ub.abs()) || stat > 1e-5 {
                bad.push(format!("{} {label}: lambda_min {lam:e}, |C.Z - ub| {:e}, stationarity {stat:e}", r.name, (cz - res.ub).abs()));
            }
        }
    }
    report(6, bad.is_empty() && checked > 0, &format!("{checked} certificates checked"));
    assert!(checked > 0);
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

fn parse_csv_bounds(text: &str) -> Vec<(f64, f64, f64)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (il, iu, ig) = (col("lb"), col("ub"), col("gap"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let p = |s: &str| match s {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                _ => s.parse().unwrap(),
            };
            (p(f[il]), p(f[iu]), p(f[ig]))
        })
        .collect()
}

#[test]
fn criterion_07_trace_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = vec![];
    let mut rows = 0;
    for r in runs() {
        for (label, res) in [("pcp", &r.pcp), ("cp", &r.cp)] {
            let out = dir.path().join(format!("{}-{label}", r.name));
            emit_report(res, &r.inst, label, &out, LogFormat::Csv).unwrap();
            let logged = parse_csv_bounds(&std::fs::read_to_string(out.join("trace.csv")).unwrap());
            rows += logged.len();
            for w in logged.windows(2) {
                if w[1].0 < w[0].0 || w[1].1 > w[0].1 {
                    bad.push(format!("{} {label}: bounds move the wrong way {:?} -> {:?}", r.name, w[0], w[1]));
                }
            }
            for &(lb, ub, _) in &logged {
                if lb > ub {
                    bad.push(format!("{} {label}: lb {lb} > ub {ub}", r.name));
                }
            }
        }
    }
    report(7, bad.is_empty(), &format!("{} traces, {rows} logged rows", 2 * runs().len()));
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

// ---------------------------------------------------------------- others

#[test]
fn criterion_08_congruent_expansion() {
    let mut r = rng(8_000);
    let mut violations = vec![];
    for i in 0..200 {
        let n = r.random_range(1..=8);
        let np = n + r.random_range(0..=4);
        // PSD (possibly singular) or clearly indefinite X.
        let kind = i % 3;
        let eigs: Vec<f64> = (0..n)
            .map(|j| match kind {
                0 => r.random_range(0.1..5.0),
                1 => if j == 0 { 0.0 } else { r.random_range(0.0..5.0) },
                _ => if j == 0 { -r.random_range(0.1..2.0) } else { r.random_range(-2.0..5.0) },
            })
            .collect();
        let x = SymMatrix::symmetrize(&common::sym_with_spectrum(&eigs, &mut r));
        let u = random_orthogonal(np, &mut r);
        let v = random_orthogonal(n, &mut r);
        let sig: Vec<f64> = (0..n).map(|_| r.random_range(0.3..3.0)).collect();
        let mut s = DMatrix::zeros(np, n);
        for j in 0..n {
            s[(j, j)] = sig[j];
        }
        let m = &u * s * v.transpose();
        let smax = sig.iter().fold(0.0_f64, |a, b| a.max(*b));
        let xp = SymMatrix::symmetrize(&(&m * x.as_matrix() * m.transpose()));
        let tol_x = 1e-9 * 1.0_f64.max(x.max_abs());
        let tol_xp = tol_x * smax * smax;
        let psd_x = min_eigenpairs(&x, 1).unwrap()[0].value >= -tol_x;
        let psd_xp = min_eigenpairs(&xp, 1).unwrap()[0].value >= -tol_xp;
        if psd_x != psd_xp || psd_x == (kind == 2) {
            violations.push(format!("pair {i}: X psd {psd_x}, MXM^T psd {psd_xp}, kind {kind}"));
        }
    }
    report(8, violations.is_empty(), &format!("200 pairs, {} violations", violations.len()));
    assert!(violations.is_empty(), "{}", violations.join("\n"));
}

#[test]
fn criterion_09_generator_fidelity() {
    let mut bad = vec![];
    for (n, k) in [(40, 6), (80, 12)] {
        for seed in 0..5u64 {
            let g = generate_detailed(&GenParams::first_family(n, k, seed)).unwrap();
            let inst = &g.instance;
            let ev = symmetric_eigenvalues(inst.c()).unwrap();
            let zc = g.null_counts[k];
            let null_ok = ev[..zc].iter().all(|l| l.abs() <= 1e-8);
            if !null_ok || ev[zc] < 30.0 - 1e-8 || *ev.last().unwrap() > 50.0 + 1e-8 {
                bad.push(format!("n{n} k{k} s{seed}: C spectrum {:?}..{:?}", &ev[..=zc], ev.last()));
            }
            for (i, a) in inst.a().iter().enumerate() {
                let ev = symmetric_eigenvalues(a).unwrap();
                let zeros = ev.iter().filter(|l| l.abs() <= 1e-8).count();
                let in_range = ev.iter().filter(|l| (9.0 - 1e-8..=10.0 + 1e-8).contains(*l)).count();
                if zeros + in_range != n || zeros != g.null_counts[i] {
                    bad.push(format!("n{n} k{k} s{seed}: A_{i} has {zeros} zeros, {in_range} in [9, 10]"));
                }
            }
            let forced = generate_detailed(&GenParams { insert_prob: 1.0, ..GenParams::first_family(n, k, seed) }).unwrap();
            for v in &forced.shared_vectors {
                for (i, m) in forced.instance.a().iter().chain(std::iter::once(forced.instance.c())).enumerate() {
                    let r = m.mul_vec(v).amax();
                    if r > 1e-9 {
                        bad.push(format!("n{n} k{k} s{seed}: forced matrix {i} leaves |Mv| = {r:e}"));
                    }
                }
            }
        }
    }
    report(9, bad.is_empty(), &format!("{} problems", bad.len()));
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn criterion_10_sdpa_round_trip_and_cli_project() {
    let mut bad = vec![];
    for seed in 0..100u64 {
        let n = 3 + (seed % 8) as usize;
        let k = 1 + (seed % 5) as usize;
        let p = if seed % 2 == 0 {
            GenParams::first_family(n, k, seed)
        } else {
            GenParams::huge_family(n, k, seed, [-20.0, 100.0], [0.0, 100.0])
        };
        let inst = generate_instance(&p).unwrap();
        let text = write_sdpa(&inst);
        let back = parse_sdpa(&text).unwrap();
        if back != inst || write_sdpa(&back) != text {
            bad.push(format!("seed {seed}: round trip changed the instance"));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pair.json");
    std::fs::write(&input, r#"{"X": [[1, 0], [0, 0]], "D": [[0, 1], [1, 0]]}"#).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pcsdp")).arg("project").arg(&input).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let cli_ok = out.status.success()
        && stdout.lines().any(|l| l.trim() == "t* = 0")
        && stdout.lines().any(|l| l.trim() == "case = D-tricky");
    if !cli_ok {
        bad.push(format!("cli project printed:\n{stdout}"));
    }
    report(10, bad.is_empty(), &format!("100 SDPA round trips, cli project {}", if cli_ok { "ok" } else { "wrong" }));
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
