//! Black-box tests of the binary: command behavior, exit codes, report
//! round-trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_condexp"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn solve_oracle_prints_atom_table() {
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("method: oracle"));
    assert!(text.contains("1.5"));
    assert!(text.contains("3.5"));
}

#[test]
fn solve_gradient_jacobi_takes_one_iteration() {
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--method",
        "gradient",
        "--step-policy",
        "jacobi",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("iterations: 1"));
    assert!(text.contains("1.5"));
    assert!(text.contains("3.5"));
}

#[test]
fn solve_on_trivial_sigma_returns_the_mean() {
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "trivial",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("2.5"));
}

#[test]
fn solve_projection_accepts_a_named_basis() {
    // Two independent measurable variables span the atom space.
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--method",
        "projection",
        "--basis",
        "xi_good,xi_bad",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("1.5"));
    assert!(text.contains("3.5"));

    // A single element spans one direction of two: rejected.
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--method",
        "projection",
        "--basis",
        "xi_good",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_with_verify_passes_on_fixture() {
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--verify",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("overall: PASS"));
}

#[test]
fn verify_flags_the_corrupted_atom() {
    let out = run(&[
        "verify",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--claimed",
        "xi_bad",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("defining/atom 0"));
    assert!(text.contains("FAIL"));
}

#[test]
fn verify_with_zero_samples_checks_atoms_only() {
    let out = run(&[
        "verify",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--samples",
        "0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("random-directions (0 samples)"));
    assert!(text.contains("overall: PASS"));
}

#[test]
fn verify_runs_the_tower_check_with_a_second_sigma() {
    let out = run(&[
        "verify",
        "--space",
        &fixture("tower_eight.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--sigma2",
        "halves",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("tower/tower-property"));

    // Swapped roles: pairs does not coarsen halves.
    let out = run(&[
        "verify",
        "--space",
        &fixture("tower_eight.toml"),
        "--var",
        "x",
        "--sigma",
        "halves",
        "--sigma2",
        "pairs",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_derivatives_passes_with_defaults() {
    let out = run(&[
        "check-derivatives",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("formula/linear-quotient"));
    assert!(text.contains("overall: PASS"));
}

#[test]
fn check_derivatives_accepts_a_single_step() {
    let out = run(&[
        "check-derivatives",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--steps",
        "0.1",
    ]);
    assert!(out.status.success());
}

#[test]
fn check_derivatives_rejects_negative_steps() {
    let out = run(&[
        "check-derivatives",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--steps=-0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_reports_exact_heavy_tail_errors() {
    let out = run(&[
        "density",
        "--space",
        &fixture("heavy_tail.toml"),
        "--var",
        "x",
        "--sigma",
        "trivial",
        "--schedule",
        "1,10,100",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("2.475000e1"));
    assert!(text.contains("2.250000e1"));
    assert!(text.contains("envelopes: PASS"));
}

#[test]
fn density_constant_variable_gives_zero_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("constant.toml");
    std::fs::write(
        &path,
        "probabilities = [1, 1, 1]\n[variables]\nc = [2.0, 2.0, 2.0]\n\
         [sigma_algebras.t]\natoms = [[0, 1, 2]]\n",
    )
    .unwrap();
    let out = run(&[
        "density",
        "--space",
        &path.display().to_string(),
        "--var",
        "c",
        "--sigma",
        "t",
        "--k-max",
        "5",
        "--schedule",
        "1,10",
    ]);
    assert!(out.status.success());
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn malformed_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "probabilities = [oops").unwrap();
    let out = run(&[
        "solve",
        "--space",
        &path.display().to_string(),
        "--var",
        "x",
        "--sigma",
        "g",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_names_are_usage_errors() {
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "missing",
        "--sigma",
        "pairs",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "missing",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradient_non_convergence_exits_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("partial.json");
    let out = run(&[
        "solve",
        "--space",
        &fixture("four_point.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--method",
        "gradient",
        "--step-policy",
        "fixed",
        "--eta",
        "0.001",
        "--max-iters",
        "2",
        "--tol",
        "1e-14",
        "--out",
        &report.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["solution"]["converged"], serde_json::Value::Bool(false));
    assert_eq!(json["solution"]["iterations"], 2);
}

#[test]
fn report_problem_section_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = run(&[
        "solve",
        "--space",
        &fixture("tower_eight.toml"),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--out",
        &first.display().to_string(),
    ]);
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();

    // Re-emit the embedded problem as a TOML file and solve again.
    let problem: condexp_report_problem::ProblemFile =
        serde_json::from_value(json["problem"].clone()).unwrap();
    let replay = dir.path().join("replay.toml");
    std::fs::write(&replay, toml::to_string(&problem).unwrap()).unwrap();
    let second = dir.path().join("second.json");
    let out = run(&[
        "solve",
        "--space",
        &replay.display().to_string(),
        "--var",
        "x",
        "--sigma",
        "pairs",
        "--out",
        &second.display().to_string(),
    ]);
    assert!(out.status.success());
    let rejson: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(json["solution"], rejson["solution"]);
    assert_eq!(json["problem"], rejson["problem"]);
}

/// The embedded problem schema, redeclared here so the test exercises the
/// published JSON layout rather than internal types.
mod condexp_report_problem {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    pub struct ProblemFile {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub outcomes: Option<Vec<String>>,
        pub probabilities: Vec<f64>,
        #[serde(default)]
        pub variables: BTreeMap<String, Vec<f64>>,
        #[serde(default)]
        pub sigma_algebras: BTreeMap<String, SigmaSpec>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum SigmaSpec {
        Atoms { atoms: Vec<Vec<usize>> },
        Generators { generators: Vec<Vec<usize>> },
    }
}
