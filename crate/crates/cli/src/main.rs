//! Command-line front end: solve conditioning problems from a problem
//! file, verify the defining identities, validate the derivative formulas,
//! and produce density/truncation error tables.
//!
//! Exit codes: 0 on success (all checks pass), 2 on usage or input errors,
//! 3 on solver non-convergence or verification failure.

mod problem;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use condexp::solvers::{
    default_fixed_step, solve_gradient, solve_oracle, solve_projection, tower_check,
    verify_defining_property_with, verify_dirichlet_gap, verify_product_identity, CondExpResult,
    GradientConfig, InitialPoint, StepPolicy,
};
use condexp::{
    approximation_trace, l1_extension_trace, EnergyProblem, Error, ProbabilitySpace,
    RandomVariable, SigmaAlgebra, DEFAULT_GATEAUX_STEPS,
};

use problem::ProblemFile;
use report::{
    CheckRow, DensitySection, DerivativeSection, Inputs, Report, SolutionSection, TraceTable,
    VerificationSection,
};

#[derive(Parser)]
#[command(
    name = "condexp",
    version,
    about = "Conditional expectation on finite probability spaces",
    after_help = "Exit codes: 0 success/pass, 2 usage or input error, \
                  3 non-convergence or verification failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Problem file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    space: Option<PathBuf>,

    /// Variable name from the problem file.
    #[arg(long, global = true, value_name = "NAME")]
    var: Option<String>,

    /// Sigma-algebra name from the problem file.
    #[arg(long, global = true, value_name = "NAME")]
    sigma: Option<String>,

    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the machine-readable JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Tolerance override: the gradient stopping tolerance for `solve`,
    /// the defect tolerance for `verify`/`check-derivatives`, extra
    /// envelope slack for `density`.
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the conditional expectation and print the atom table.
    Solve {
        #[arg(long, value_enum, default_value_t = MethodArg::Oracle)]
        method: MethodArg,
        /// Step policy for the gradient method.
        #[arg(long, value_enum, default_value_t = StepPolicyArg::Jacobi)]
        step_policy: StepPolicyArg,
        /// Fixed step size; defaults to 1 / max P(atom).
        #[arg(long, value_name = "REAL")]
        eta: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Starting point for the gradient method.
        #[arg(long, value_enum, default_value_t = InitArg::Zero)]
        init: InitArg,
        /// Comma-separated variable names to use as the projection basis
        /// (defaults to the atom indicators).
        #[arg(long, value_delimiter = ',', value_name = "NAMES")]
        basis: Vec<String>,
        /// Also run the verification suites on the solution.
        #[arg(long)]
        verify: bool,
    },
    /// Verify the defining identities of a solution.
    Verify {
        /// Random measurable directions per identity.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Verify this variable as the claimed solution instead of solving.
        #[arg(long, value_name = "NAME")]
        claimed: Option<String>,
        /// Coarser sigma-algebra: also check two-stage conditioning
        /// against direct conditioning on it.
        #[arg(long, value_name = "NAME")]
        sigma2: Option<String>,
    },
    /// Validate the closed-form derivative formulas at finite steps.
    CheckDerivatives {
        #[arg(long, default_value_t = 20)]
        directions: usize,
        /// Comma-separated strictly decreasing positive steps.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "REALS")]
        steps: Vec<f64>,
    },
    /// Staircase and truncation error tables. The staircase approximates
    /// the conditional expectation of the variable (always measurable);
    /// the truncation schedule clamps the variable itself.
    Density {
        #[arg(long, default_value_t = 10)]
        k_max: usize,
        /// Comma-separated strictly increasing truncation bounds.
        #[arg(long, value_delimiter = ',', value_name = "REALS")]
        schedule: Vec<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Oracle,
    Projection,
    Gradient,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepPolicyArg {
    Jacobi,
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Zero,
    Mean,
}

enum Failure {
    /// Usage or input problem: exit 2.
    Input(String),
    /// Non-convergence or failed verification: exit 3.
    Run(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Run(message)) => {
            eprintln!("{message}");
            ExitCode::from(3)
        }
    }
}

struct Context {
    file: ProblemFile,
    space: ProbabilitySpace,
    var_name: String,
    x: RandomVariable,
    sigma_name: String,
    sigma: SigmaAlgebra,
}

fn load_context(cli: &Cli) -> Result<Context, Failure> {
    let path = cli
        .space
        .as_ref()
        .ok_or_else(|| Failure::Input("--space <PATH> is required".into()))?;
    let file = ProblemFile::load(path).map_err(Failure::Input)?;
    let space = file
        .space()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let var_name = cli
        .var
        .clone()
        .ok_or_else(|| Failure::Input("--var <NAME> is required".into()))?;
    let x = file.variable(&var_name).map_err(Failure::Input)?;
    if x.len() != space.len() {
        return Err(Failure::Input(format!(
            "variable `{var_name}` has {} values for {} outcomes",
            x.len(),
            space.len()
        )));
    }
    let sigma_name = cli
        .sigma
        .clone()
        .ok_or_else(|| Failure::Input("--sigma <NAME> is required".into()))?;
    let sigma = file.sigma(&sigma_name).map_err(Failure::Input)?;
    Ok(Context {
        file,
        space,
        var_name,
        x,
        sigma_name,
        sigma,
    })
}

fn write_report(cli: &Cli, report: &Report) -> Result<(), Failure> {
    if let Some(path) = &cli.out {
        std::fs::write(path, report.to_json())
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    let ctx = load_context(&cli)?;
    println!(
        "problem: {} ({} outcomes)",
        cli.space.as_ref().unwrap().display(),
        ctx.space.len()
    );
    let atom_count = ctx.sigma.atom_count();
    println!(
        "variable: {}   sigma-algebra: {} ({} atom{})",
        ctx.var_name,
        ctx.sigma_name,
        atom_count,
        if atom_count == 1 { "" } else { "s" }
    );

    let result = match &cli.command {
        Command::Solve {
            method,
            step_policy,
            eta,
            max_iters,
            init,
            basis,
            verify,
        } => cmd_solve(
            &cli,
            &ctx,
            *method,
            *step_policy,
            *eta,
            *max_iters,
            *init,
            basis,
            *verify,
        ),
        Command::Verify {
            samples,
            claimed,
            sigma2,
        } => cmd_verify(&cli, &ctx, *samples, claimed.as_deref(), sigma2.as_deref()),
        Command::CheckDerivatives { directions, steps } => {
            cmd_check_derivatives(&cli, &ctx, *directions, steps)
        }
        Command::Density { k_max, schedule } => cmd_density(&cli, &ctx, *k_max, schedule),
    };
    println!("elapsed: {:.2} ms", started.elapsed().as_secs_f64() * 1e3);
    result
}

fn print_atom_table(space: &ProbabilitySpace, sigma: &SigmaAlgebra, result: &CondExpResult) {
    println!("method: {}", result.method());
    println!("{:<6} {:<24} {:<14} value", "atom", "members", "P(atom)");
    for (index, members) in sigma.atoms().iter().enumerate() {
        let mass: f64 = members.iter().map(|&i| space.weight(i)).sum();
        let rendered = members
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let marker = if result.null_atom_indices().contains(&index) {
            "  (null atom)"
        } else {
            ""
        };
        println!(
            "{index:<6} {:<24} {mass:<14.6} {}{marker}",
            format!("{{{rendered}}}"),
            result.atom_values()[index]
        );
    }
    if result.method().as_str() == "gradient" {
        println!(
            "iterations: {}   final gradient norm: {:e}",
            result.iterations(),
            result.final_gradient_norm().unwrap_or(f64::NAN)
        );
    }
}

fn print_checks(rows: &[CheckRow]) {
    println!("{:<44} {:<14} {:<14} result", "check", "max defect", "tolerance");
    for row in rows {
        println!(
            "{:<44} {:<14.3e} {:<14.3e} {}",
            row.name,
            row.max_defect,
            row.tolerance,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
}

/// Runs the full verification battery and collects the rows.
fn run_verification(
    ctx: &Context,
    xi: &RandomVariable,
    samples: usize,
    seed: u64,
    coarse: Option<(&str, &SigmaAlgebra)>,
    tol: Option<f64>,
) -> Result<(Vec<CheckRow>, usize), Failure> {
    let mut rows = Vec::new();
    let defining =
        verify_defining_property_with(&ctx.space, &ctx.sigma, &ctx.x, xi, seed, samples.min(32))
            .map_err(verification_failure)?;
    rows.extend(
        defining
            .checks()
            .iter()
            .map(|c| CheckRow::from_check("defining", c).with_tolerance(tol)),
    );
    let product = verify_product_identity(&ctx.space, &ctx.sigma, &ctx.x, xi, samples, seed)
        .map_err(verification_failure)?;
    rows.extend(
        product
            .checks()
            .iter()
            .map(|c| CheckRow::from_check("product", c).with_tolerance(tol)),
    );
    let dirichlet = verify_dirichlet_gap(&ctx.space, &ctx.sigma, &ctx.x, xi, samples, seed)
        .map_err(verification_failure)?;
    rows.extend(
        dirichlet
            .checks()
            .iter()
            .map(|c| CheckRow::from_check("dirichlet", c).with_tolerance(tol)),
    );
    let mut checks_evaluated = defining.checks().len() + product.checks().len() + dirichlet.checks().len();
    if let Some((name, coarse_sigma)) = coarse {
        let tower = tower_check(&ctx.space, coarse_sigma, &ctx.sigma, &ctx.x).map_err(|e| {
            match e {
                Error::NotRefinement => Failure::Input(format!(
                    "`{name}` must be coarser than `{}` for the tower check",
                    ctx.sigma_name
                )),
                other => Failure::Input(other.to_string()),
            }
        })?;
        rows.extend(
            tower
                .checks()
                .iter()
                .map(|c| CheckRow::from_check("tower", c).with_tolerance(tol)),
        );
        checks_evaluated += tower.checks().len();
    }
    Ok((rows, checks_evaluated))
}

fn verification_failure(error: Error) -> Failure {
    match error {
        Error::NotMeasurable { .. } => Failure::Run(format!("verification failed: {error}")),
        other => Failure::Input(other.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    cli: &Cli,
    ctx: &Context,
    method: MethodArg,
    step_policy: StepPolicyArg,
    eta: Option<f64>,
    max_iters: usize,
    init: InitArg,
    basis_names: &[String],
    verify: bool,
) -> Result<(), Failure> {
    let mut inputs = Inputs {
        variable: ctx.var_name.clone(),
        sigma_algebra: ctx.sigma_name.clone(),
        seed: cli.seed,
        tolerance: cli.tol,
        ..Inputs::default()
    };

    let solved: Result<CondExpResult, Error> = match method {
        MethodArg::Oracle => {
            inputs.method = Some("oracle".into());
            solve_oracle(&ctx.space, &ctx.sigma, &ctx.x)
        }
        MethodArg::Projection => {
            inputs.method = Some("projection".into());
            let basis: Option<Vec<RandomVariable>> = if basis_names.is_empty() {
                None
            } else {
                let mut elements = Vec::with_capacity(basis_names.len());
                for name in basis_names {
                    elements.push(ctx.file.variable(name).map_err(Failure::Input)?);
                }
                Some(elements)
            };
            solve_projection(&ctx.space, &ctx.sigma, &ctx.x, basis.as_deref())
        }
        MethodArg::Gradient => {
            inputs.method = Some("gradient".into());
            let policy = match step_policy {
                StepPolicyArg::Jacobi => StepPolicy::JacobiPreconditioned,
                StepPolicyArg::Fixed => {
                    let eta = match eta {
                        Some(eta) => eta,
                        None => default_fixed_step(&ctx.space, &ctx.sigma)
                            .map_err(|e| Failure::Input(e.to_string()))?,
                    };
                    StepPolicy::Fixed(eta)
                }
            };
            let config = GradientConfig {
                step_policy: policy,
                tolerance: cli.tol.unwrap_or(1e-10),
                max_iterations: max_iters,
                initial_point: match init {
                    InitArg::Zero => InitialPoint::Zero,
                    InitArg::Mean => InitialPoint::UnconditionalMean,
                },
            };
            solve_gradient(&ctx.space, &ctx.sigma, &ctx.x, &config)
        }
    };

    let mut report = Report::new("solve", ctx.file.normalized(&ctx.space), inputs);
    let result = match solved {
        Ok(result) => result,
        Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            last,
        }) => {
            // Partial report, then the non-convergence exit.
            print_atom_table(&ctx.space, &ctx.sigma, &last);
            report.solution = Some(SolutionSection::from_result(
                &ctx.space, &ctx.sigma, &last, false,
            ));
            report.timings.solver_iterations = last.iterations();
            write_report(cli, &report)?;
            return Err(Failure::Run(format!(
                "gradient descent did not converge: gradient norm {gradient_norm:e} \
                 after {iterations} iterations"
            )));
        }
        Err(Error::InvalidConfig { reason }) => return Err(Failure::Input(reason)),
        Err(other) => return Err(Failure::Input(other.to_string())),
    };

    print_atom_table(&ctx.space, &ctx.sigma, &result);
    report.solution = Some(SolutionSection::from_result(
        &ctx.space, &ctx.sigma, &result, true,
    ));
    report.timings.solver_iterations = result.iterations();

    let mut pass = true;
    if verify {
        let (rows, evaluated) =
            run_verification(ctx, result.xi(), 100, cli.seed, None, cli.tol)?;
        pass = rows.iter().all(|r| r.pass);
        println!();
        print_checks(&rows);
        println!("overall: {}", if pass { "PASS" } else { "FAIL" });
        report.timings.checks_evaluated = evaluated;
        report.timings.samples_drawn = 100;
        report.verification = Some(VerificationSection {
            checks: rows,
            overall_pass: pass,
        });
    }
    write_report(cli, &report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Run("verification failed".into()))
    }
}

fn cmd_verify(
    cli: &Cli,
    ctx: &Context,
    samples: usize,
    claimed: Option<&str>,
    sigma2: Option<&str>,
) -> Result<(), Failure> {
    let xi = match claimed {
        Some(name) => ctx.file.variable(name).map_err(Failure::Input)?,
        None => solve_oracle(&ctx.space, &ctx.sigma, &ctx.x)
            .map_err(|e| Failure::Input(e.to_string()))?
            .xi()
            .clone(),
    };
    let coarse = match sigma2 {
        Some(name) => Some((name, ctx.file.sigma(name).map_err(Failure::Input)?)),
        None => None,
    };
    let coarse_ref = coarse.as_ref().map(|(n, s)| (*n, s));
    let (rows, evaluated) = run_verification(ctx, &xi, samples, cli.seed, coarse_ref, cli.tol)?;
    let pass = rows.iter().all(|r| r.pass);
    print_checks(&rows);
    println!("overall: {}", if pass { "PASS" } else { "FAIL" });

    let inputs = Inputs {
        variable: ctx.var_name.clone(),
        sigma_algebra: ctx.sigma_name.clone(),
        coarse_sigma_algebra: sigma2.map(str::to_string),
        claimed: claimed.map(str::to_string),
        seed: cli.seed,
        samples: Some(samples),
        tolerance: cli.tol,
        ..Inputs::default()
    };
    let mut report = Report::new("verify", ctx.file.normalized(&ctx.space), inputs);
    report.timings.checks_evaluated = evaluated;
    report.timings.samples_drawn = samples;
    report.verification = Some(VerificationSection {
        checks: rows,
        overall_pass: pass,
    });
    write_report(cli, &report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Run("verification failed".into()))
    }
}

fn cmd_check_derivatives(
    cli: &Cli,
    ctx: &Context,
    directions: usize,
    steps: &[f64],
) -> Result<(), Failure> {
    let steps: Vec<f64> = if steps.is_empty() {
        DEFAULT_GATEAUX_STEPS.to_vec()
    } else {
        steps.to_vec()
    };
    let energy = EnergyProblem::new(ctx.space.clone(), ctx.x.clone(), ctx.sigma.clone())
        .map_err(|e| Failure::Input(e.to_string()))?;
    let checked = energy
        .check_derivatives(directions, &steps, cli.seed)
        .map_err(|e| Failure::Input(e.to_string()))?;

    let section = DerivativeSection::from_report(&checked, cli.tol);
    println!(
        "{:<12} {:<16} {:<16} second",
        "step", "linear", "expansion"
    );
    for row in &section.per_step {
        println!(
            "{:<12} {:<16.3e} {:<16.3e} {:.3e}",
            row.step, row.linear_defect, row.expansion_defect, row.second_defect
        );
    }
    print_checks(&section.formulas);
    let pass = section.pass;
    println!("overall: {}", if pass { "PASS" } else { "FAIL" });

    let inputs = Inputs {
        variable: ctx.var_name.clone(),
        sigma_algebra: ctx.sigma_name.clone(),
        seed: cli.seed,
        directions: Some(directions),
        steps: Some(steps.clone()),
        tolerance: cli.tol,
        ..Inputs::default()
    };
    let mut report = Report::new("check-derivatives", ctx.file.normalized(&ctx.space), inputs);
    report.timings.checks_evaluated = section.formulas.len();
    report.timings.samples_drawn = directions * steps.len();
    report.derivative_check = Some(section);
    write_report(cli, &report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Run("derivative checks failed".into()))
    }
}

fn cmd_density(cli: &Cli, ctx: &Context, k_max: usize, schedule: &[f64]) -> Result<(), Failure> {
    let schedule: Vec<f64> = if schedule.is_empty() {
        vec![1.0, 10.0, 100.0, 1000.0]
    } else {
        schedule.to_vec()
    };
    let slack = cli.tol.unwrap_or(0.0);

    // The staircase needs a measurable input; the conditional expectation
    // is the measurable face of the variable.
    let xi = solve_oracle(&ctx.space, &ctx.sigma, &ctx.x)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let stairs = approximation_trace(&ctx.space, &ctx.sigma, xi.xi(), k_max)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let staircase_levels: Vec<f64> = (1..=k_max).map(|k| k as f64).collect();
    let staircase_table = TraceTable::from_trace(&stairs, &staircase_levels, slack);
    println!("staircase (on the conditional expectation):");
    println!(
        "{:<8} {:<14} {:<14} {:<14} bound",
        "k", "width", "L2 error", "L1 error"
    );
    for row in &staircase_table.levels {
        println!(
            "{:<8} {:<14.6e} {:<14.6e} {:<14.6e} {:.6e}",
            row.level, row.step_width, row.error_l2, row.error_l1, row.bound
        );
    }

    let extension = l1_extension_trace(&ctx.space, &ctx.sigma, &ctx.x, &schedule)
        .map_err(|e| Failure::Input(e.to_string()))?;
    let truncation_table = TraceTable::from_trace(&extension, &schedule, slack);
    println!("truncation schedule:");
    println!(
        "{:<8} {:<14} {:<14} input L1 error",
        "n", "L2 error", "L1 error"
    );
    for row in &truncation_table.levels {
        println!(
            "{:<8} {:<14.6e} {:<14.6e} {:.6e}",
            row.level, row.error_l2, row.error_l1, row.bound
        );
    }

    let pass = staircase_table.envelope_pass && truncation_table.envelope_pass;
    println!("envelopes: {}", if pass { "PASS" } else { "FAIL" });

    let inputs = Inputs {
        variable: ctx.var_name.clone(),
        sigma_algebra: ctx.sigma_name.clone(),
        seed: cli.seed,
        k_max: Some(k_max),
        schedule: Some(schedule.clone()),
        tolerance: cli.tol,
        ..Inputs::default()
    };
    let mut report = Report::new("density", ctx.file.normalized(&ctx.space), inputs);
    report.timings.trace_levels = k_max + schedule.len();
    report.density = Some(DensitySection {
        staircase: Some(staircase_table),
        truncation: Some(truncation_table),
        pass,
    });
    write_report(cli, &report)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Run("density envelopes violated".into()))
    }
}
