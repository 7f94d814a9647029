//! Machine-readable run reports.
//!
//! The JSON report mirrors what the human-readable output shows, with
//! stable key names and deterministic content: identical inputs and seeds
//! produce byte-identical files. The embedded `problem` section is a
//! complete problem file (with normalized probabilities), so a report can
//! be re-run. The `timings` section deliberately records effort counters
//! (iterations, checks, samples, levels) instead of wall-clock time, which
//! would break reproducibility; wall-clock goes to stdout only.

use serde::Serialize;

use condexp::solvers::{CondExpResult, VerificationCheck};
use condexp::{ApproximationTrace, DerivativeCheckReport, ProbabilitySpace, SigmaAlgebra};

use crate::problem::ProblemFile;

pub const SCHEMA: &str = "condexp-report/1";

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub problem: ProblemFile,
    pub inputs: Inputs,
    pub solution: Option<SolutionSection>,
    pub verification: Option<VerificationSection>,
    pub derivative_check: Option<DerivativeSection>,
    pub density: Option<DensitySection>,
    pub timings: Timings,
}

impl Report {
    pub fn new(command: &str, problem: ProblemFile, inputs: Inputs) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            problem,
            inputs,
            solution: None,
            verification: None,
            derivative_check: None,
            density: None,
            timings: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Inputs {
    pub variable: String,
    pub sigma_algebra: String,
    pub coarse_sigma_algebra: Option<String>,
    pub claimed: Option<String>,
    pub method: Option<String>,
    pub seed: u64,
    pub samples: Option<usize>,
    pub directions: Option<usize>,
    pub steps: Option<Vec<f64>>,
    pub k_max: Option<usize>,
    pub schedule: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SolutionSection {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: Option<f64>,
    pub null_atom_indices: Vec<usize>,
    pub atoms: Vec<AtomRow>,
    pub xi: Vec<f64>,
    pub j_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct AtomRow {
    pub index: usize,
    pub members: Vec<usize>,
    pub probability: f64,
    pub value: f64,
}

impl SolutionSection {
    pub fn from_result(
        space: &ProbabilitySpace,
        sigma: &SigmaAlgebra,
        result: &CondExpResult,
        converged: bool,
    ) -> Self {
        let atoms = sigma
            .atoms()
            .iter()
            .enumerate()
            .map(|(index, members)| AtomRow {
                index,
                members: members.clone(),
                probability: members.iter().map(|&i| space.weight(i)).sum(),
                value: result.atom_values()[index],
            })
            .collect();
        SolutionSection {
            method: result.method().to_string(),
            converged,
            iterations: result.iterations(),
            final_gradient_norm: result.final_gradient_norm(),
            null_atom_indices: result.null_atom_indices().to_vec(),
            atoms,
            xi: result.xi().values().to_vec(),
            j_trace: result.j_trace().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerificationSection {
    pub checks: Vec<CheckRow>,
    pub overall_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn from_check(prefix: &str, check: &VerificationCheck) -> Self {
        CheckRow {
            name: format!("{prefix}/{}", check.name),
            max_defect: check.max_defect,
            tolerance: check.tolerance,
            pass: check.pass,
        }
    }

    /// Re-judge against an overriding tolerance.
    pub fn with_tolerance(mut self, tolerance: Option<f64>) -> Self {
        if let Some(tol) = tolerance {
            self.tolerance = tol;
            self.pass = self.max_defect <= tol;
        }
        self
    }
}

#[derive(Debug, Serialize)]
pub struct DerivativeSection {
    pub directions: usize,
    pub steps: Vec<f64>,
    pub per_step: Vec<StepRow>,
    pub formulas: Vec<CheckRow>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct StepRow {
    pub step: f64,
    pub linear_defect: f64,
    pub expansion_defect: f64,
    pub second_defect: f64,
}

impl DerivativeSection {
    pub fn from_report(report: &DerivativeCheckReport, tolerance: Option<f64>) -> Self {
        let per_step = report
            .per_step()
            .iter()
            .map(|s| StepRow {
                step: s.step,
                linear_defect: s.linear,
                expansion_defect: s.expansion,
                second_defect: s.second,
            })
            .collect();
        let formulas: Vec<CheckRow> = report
            .checks()
            .iter()
            .map(|c| {
                CheckRow {
                    name: format!("formula/{}", c.name),
                    max_defect: c.max_defect,
                    tolerance: c.tolerance,
                    pass: c.pass,
                }
                .with_tolerance(tolerance)
            })
            .collect();
        let pass = formulas.iter().all(|c| c.pass);
        DerivativeSection {
            directions: report.direction_count(),
            steps: report.step_sizes(),
            per_step,
            formulas,
            pass,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DensitySection {
    pub staircase: Option<TraceTable>,
    pub truncation: Option<TraceTable>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct TraceTable {
    pub levels: Vec<LevelRow>,
    pub envelope_pass: bool,
}

#[derive(Debug, Serialize)]
pub struct LevelRow {
    pub level: f64,
    pub step_width: f64,
    pub error_l2: f64,
    pub error_l1: f64,
    pub bound: f64,
}

impl TraceTable {
    pub fn from_trace(trace: &ApproximationTrace, levels: &[f64], slack: f64) -> Self {
        let rows = levels
            .iter()
            .enumerate()
            .map(|(i, &level)| LevelRow {
                level,
                step_width: trace.step_width()[i],
                error_l2: trace.errors_l2()[i],
                error_l1: trace.errors_l1()[i],
                bound: trace.bound()[i],
            })
            .collect();
        TraceTable {
            levels: rows,
            envelope_pass: trace.envelope_holds_within(slack),
        }
    }
}

/// Deterministic effort counters; see the module docs for why these stand
/// in for wall-clock measurements.
#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub solver_iterations: usize,
    pub checks_evaluated: usize,
    pub samples_drawn: usize,
    pub trace_levels: usize,
}
