use pcsdp_demo::{project_json, solve_json, spectra_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn projection_curve_crosses_zero_at_the_step() {
    let v = parse(&project_json(r#"{"X": [[1, 0], [0, 1]], "D": [[-2, 0], [0, 1]]}"#).unwrap());
    assert_eq!(v["case"], "A");
    assert_eq!(v["t_star"].as_f64(), Some(0.5));
    let curve = v["curve"].as_array().unwrap();
    let mid = &curve[curve.len() / 2];
    assert!((mid[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(mid[1].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn tricky_pair_reports_zero_step() {
    let v = parse(&project_json(r#"{"X": [[1, 0], [0, 0]], "D": [[0, 1], [1, 0]]}"#).unwrap());
    assert_eq!(v["case"], "D-tricky");
    assert_eq!(v["t_star"].as_f64(), Some(0.0));
}

#[test]
fn bad_input_is_an_error() {
    assert!(project_json("{}").is_err());
    assert!(project_json(r#"{"X": [[1]], "D": [[1, 0], [0, 1]]}"#).is_err());
    assert!(solve_json("first", 10, 3, 0, "newton").is_err());
    assert!(spectra_json("third", 10, 3, 0).is_err());
    assert!(spectra_json("first", 500, 3, 0).is_err());
}

#[test]
fn solve_returns_a_closed_trace() {
    let v = parse(&solve_json("first", 20, 4, 1, "pcp").unwrap());
    assert_eq!(v["status"], "Converged");
    let gap = v["ub"].as_f64().unwrap() - v["lb"].as_f64().unwrap();
    assert!(gap <= 1e-5);
    assert_eq!(v["trace"].as_array().unwrap().len(), v["iterations"].as_u64().unwrap() as usize);
}

#[test]
fn spectra_show_the_planted_zeros() {
    let v = parse(&spectra_json("first", 12, 4, 2).unwrap());
    let counts = v["null_counts"].as_array().unwrap();
    let c = v["c"].as_array().unwrap();
    let zeros = c.iter().filter(|l| l.as_f64().unwrap().abs() < 1e-8).count();
    assert_eq!(zeros as u64, counts[4].as_u64().unwrap());
}
