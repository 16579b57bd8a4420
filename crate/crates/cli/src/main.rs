//! `ddro`: solve, evaluate and check distributionally robust problems
//! described in a JSON file.
//!
//! Exit codes: 0 on success, 2 when the input is rejected, 3 when a solver
//! fails. Failures are also written to standard error as one JSON object.

mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use ddro::dual::{validate_duality, GapReport};
use ddro::model::{validate, Family, ProblemSpec};
use ddro::outer::{evaluate, minimize, SolveOptions};
use ddro::sip::{
    build_ks_cont_with, build_phi_sip, build_wass_cont, run_sip, verify, GridOptions,
};
use ddro::{Error, SipProblem};

use schema::{FieldError, ProblemFile};

#[derive(Parser)]
#[command(name = "ddro", version, about = "Distributionally robust optimization with decision-dependent ambiguity sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Report path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add wall-clock time to the report (makes reports differ between runs).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize f(x) + worst-case expectation over the decision box.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smallest pattern-search step.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Objective evaluations per start.
        #[arg(long, default_value_t = 5000)]
        budget: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Worst case, dual certificate and gap at a fixed decision.
    WorstCase {
        file: PathBuf,
        /// Decision as comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[command(flatten)]
        output: Output,
    },
    /// Check primal and dual values at sampled decisions.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run the cutting-surface solver (wc and phi files) or the cell program
    /// (ksc files) at a fixed decision.
    Sip {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Separation grid points per dimension.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Lipschitz bound of the constraint in the index, sizes the grid.
        #[arg(long)]
        lipschitz: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
}

/// Why a command stopped.
enum Failure {
    Invalid {
        message: String,
        diagnostics: Vec<FieldError>,
    },
    Solver(String),
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure::Invalid {
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    fn exit(self) -> ExitCode {
        let (status, code, message, diagnostics) = match self {
            Failure::Invalid { message, diagnostics } => ("invalid", 2, message, diagnostics),
            Failure::Solver(message) => ("failed", 3, message, Vec::new()),
        };
        eprintln!(
            "{}",
            json!({ "status": status, "message": message, "diagnostics": diagnostics })
        );
        ExitCode::from(code)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OutsideBox { .. } | Error::Dimension { .. } => Failure::invalid(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Report<'a, R> {
    command: &'a str,
    spec: &'a ProblemFile,
    result: R,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

fn load(path: &Path) -> Result<(ProblemFile, ProblemSpec), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("reading {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("problem file: {e}")))?;
    let spec = file.to_spec().map_err(|diagnostics| Failure::Invalid {
        message: "expressions failed to parse".into(),
        diagnostics,
    })?;
    let diagnostics: Vec<FieldError> = validate(&spec)
        .into_iter()
        .map(|d| FieldError { path: d.path, message: d.message })
        .collect();
    if !diagnostics.is_empty() {
        return Err(Failure::Invalid {
            message: "problem failed validation".into(),
            diagnostics,
        });
    }
    Ok((file, spec))
}

fn parse_x(text: &str, spec: &ProblemSpec) -> Result<Vec<f64>, Failure> {
    let x: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::invalid(format!("--x: {e}")))?;
    spec.check_decision(&x)?;
    Ok(x)
}

fn emit<R: Serialize>(
    output: &Output,
    command: &str,
    file: &ProblemFile,
    result: R,
    started: Instant,
) -> Result<(), Failure> {
    let report = Report {
        command,
        spec: file,
        result,
        elapsed_ms: output.timing.then(|| started.elapsed().as_secs_f64() * 1e3),
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Solver(format!("serializing report: {e}")))?;
    text.push('\n');
    match &output.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Solver(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ValidateSample {
    x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ValidateSummary {
    samples: usize,
    passed: usize,
    infeasible: usize,
    errors: usize,
    max_abs_gap: f64,
    max_rel_gap: f64,
    all_pass: bool,
    results: Vec<ValidateSample>,
}

fn cmd_validate(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<ValidateSummary, Failure> {
    if !spec.family().is_finite_support() {
        return Err(Failure::invalid(format!(
            "validate needs a finite-support family, not {}",
            spec.family()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            spec.lower
                .iter()
                .zip(&spec.upper)
                .map(|(&a, &b)| if a < b { rng.gen_range(a..=b) } else { a })
                .collect()
        })
        .collect();
    let mut summary = ValidateSummary {
        samples,
        passed: 0,
        infeasible: 0,
        errors: 0,
        max_abs_gap: 0.0,
        max_rel_gap: 0.0,
        all_pass: false,
        results: Vec::with_capacity(samples),
    };
    for x in points {
        match validate_duality(spec, &x, spec.family()) {
            Ok(g) => {
                summary.passed += usize::from(g.pass);
                summary.max_abs_gap = summary.max_abs_gap.max(g.abs_gap);
                summary.max_rel_gap = summary.max_rel_gap.max(g.rel_gap);
                summary.results.push(ValidateSample { x, gap: Some(g), error: None });
            }
            Err(e) => {
                if matches!(e, Error::AmbiguityEmpty { .. }) {
                    summary.infeasible += 1;
                } else {
                    summary.errors += 1;
                }
                summary.results.push(ValidateSample { x, gap: None, error: Some(e.to_string()) });
            }
        }
    }
    summary.all_pass = summary.passed == samples;
    Ok(summary)
}

#[derive(Serialize)]
#[serde(tag = "form", rename_all = "lowercase")]
enum SipOutput {
    /// Cutting-surface run.
    Exchange {
        family: Family,
        value: f64,
        converged: bool,
        iterations: usize,
        epsilon: f64,
        final_violation: f64,
        verification_residual: f64,
        state: ddro::SipState,
    },
    Cells {
        value: f64,
        program: ddro::sip::KsContProgram<f64>,
        solution: ddro::sip::KsContSolution<f64>,
    },
}

fn exchange(problem: SipProblem<'_>, family: Family) -> Result<SipOutput, Failure> {
    let state = run_sip(&problem)?;
    let residual = verify(&problem, &state.x)?;
    Ok(SipOutput::Exchange {
        family,
        value: state.value(),
        converged: state.converged,
        iterations: state.iteration,
        epsilon: problem.epsilon,
        final_violation: state.last_violation(),
        verification_residual: residual,
        state,
    })
}

fn tuned<'a>(
    p: SipProblem<'a>,
    eps: f64,
    max_iter: usize,
    grid: &GridOptions,
    lipschitz: Option<f64>,
) -> SipProblem<'a> {
    let p = p.with_epsilon(eps).with_max_iterations(max_iter).with_grid(grid.clone());
    match lipschitz {
        Some(l) => p.with_lipschitz(l),
        None => p,
    }
}

fn cmd_sip(
    spec: &ProblemSpec,
    x: &[f64],
    eps: f64,
    max_iter: usize,
    grid: GridOptions,
    lipschitz: Option<f64>,
) -> Result<SipOutput, Failure> {
    match spec.family() {
        Family::Wc => exchange(tuned(build_wass_cont(spec, x)?, eps, max_iter, &grid, lipschitz), Family::Wc),
        Family::Phi => exchange(tuned(build_phi_sip(spec, x)?, eps, max_iter, &grid, lipschitz), Family::Phi),
        Family::Ksc => {
            let program = build_ks_cont_with(spec, x, &grid)?;
            let solution = program.solve()?;
            Ok(SipOutput::Cells {
                value: solution.value,
                program,
                solution,
            })
        }
        f => Err(Failure::invalid(format!(
            "sip needs a wc, ksc or phi family, not {f}"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    match cli.command {
        Command::Solve { file, starts, seed, tol, budget, output } => {
            let (pf, spec) = load(&file)?;
            if starts == 0 || !(tol > 0.0) {
                return Err(Failure::invalid("--starts and --tol must be positive"));
            }
            let report = minimize(&spec, &SolveOptions { starts, seed, tol, budget })?;
            emit(&output, "solve", &pf, report, started)
        }
        Command::WorstCase { file, x, output } => {
            let (pf, spec) = load(&file)?;
            let x = parse_x(&x, &spec)?;
            let evaluation = evaluate::<f64>(&spec, &x)?;
            emit(&output, "worst-case", &pf, evaluation, started)
        }
        Command::Validate { file, samples, seed, output } => {
            let (pf, spec) = load(&file)?;
            let summary = cmd_validate(&spec, samples, seed)?;
            let (infeasible, all_pass) = (summary.infeasible, summary.all_pass);
            let failed = summary.samples - summary.passed;
            emit(&output, "validate", &pf, summary, started)?;
            if infeasible > 0 {
                return Err(Failure::Solver(format!(
                    "ambiguity set empty at {infeasible} of {samples} sampled decisions"
                )));
            }
            if !all_pass {
                return Err(Failure::Solver(format!(
                    "{failed} of {samples} sampled decisions outside the gap tolerance"
                )));
            }
            Ok(())
        }
        Command::Sip { file, x, eps, max_iter, grid, lipschitz, output } => {
            let (pf, spec) = load(&file)?;
            if !(eps > 0.0) {
                return Err(Failure::invalid("ε must be positive (--eps)"));
            }
            let x = parse_x(&x, &spec)?;
            let options = GridOptions { points: grid, ..GridOptions::default() };
            let result = cmd_sip(&spec, &x, eps, max_iter, options, lipschitz)?;
            let stalled = match &result {
                SipOutput::Exchange { converged: false, iterations, final_violation, .. } => {
                    Some(Error::NonTermination {
                        iterations: *iterations,
                        violation: *final_violation,
                    })
                }
                _ => None,
            };
            emit(&output, "sip", &pf, result, started)?;
            match stalled {
                Some(e) => Err(Failure::Solver(e.to_string())),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}

