use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use peano_core::bounds::{self, BoundCertificate, BoundKind, QuasiReport, SegmentOptions};
use peano_core::corpus;
use peano_core::extremal::{self, Side};
use peano_core::gridfn::GridFunction;
use peano_core::integrators::{self, Method};
use peano_core::residual;
use peano_core::IvpProblem;
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, Status};

pub fn run(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Solve(a) => solve(a),
        Command::Residual(a) => residual(a),
        Command::Extremal(a) => extremal(a),
        Command::Verify(a) => verify(a),
        Command::Bracket(a) => bracket(a),
        Command::Quasimono(a) => quasimono(a),
        Command::Corpus(a) => corpus(a),
    }
}

fn load_problem(args: &ProblemArgs) -> Result<IvpProblem, CliError> {
    let problem = if corpus::NAMES.contains(&args.problem.as_str()) {
        corpus::get(&args.problem)?.problem
    } else if Path::new(&args.problem).exists() {
        IvpProblem::load(&args.problem)?
    } else {
        return Err(CliError::usage(
            "cli",
            format!(
                "'{}' is neither a built-in problem ({}) nor a file",
                args.problem,
                corpus::NAMES.join(", ")
            ),
        ));
    };
    if args.truncate {
        Ok(problem.truncate_rhs()?)
    } else {
        Ok(problem)
    }
}

fn read_grid(path: &Path) -> Result<GridFunction, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    GridFunction::read_csv(io::BufReader::new(file))
        .map_err(|e| CliError::usage("gridfn", format!("{}: {e}", path.display())))
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_trajectory(g: &GridFunction, path: &Option<PathBuf>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    g.write_csv(&mut out)?;
    out.flush().map_err(|e| CliError::usage("cli", e))
}

fn write_report<T: Serialize>(report: &T, path: &Option<PathBuf>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    let text = serde_json::to_string_pretty(report).expect("reports serialize");
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::usage("cli", e))
}

fn check_positive(module: &'static str, name: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(module, format!("{name} must be positive, got {value}")))
    }
}

fn solve(a: SolveArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    let method = match a.method {
        MethodArg::Tonelli => Method::Tonelli,
        MethodArg::Euler => Method::Euler,
    };
    let m = a.grid.unwrap_or(100 * a.k);
    let (trajectory, certificate) = integrators::solve(&problem, method, a.k, m)?;
    write_trajectory(&trajectory, &a.output.out)?;
    write_report(&certificate, &a.output.report)?;
    Ok(match certificate.certified {
        Some(false) => Status::Negative,
        _ => Status::Ok,
    })
}

#[derive(Serialize)]
struct ResidualOut {
    label: String,
    m: usize,
    residual: f64,
    argmax_t: f64,
    quadrature_slack: f64,
    tol: Option<f64>,
    is_solution: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    node_residuals: Option<Vec<f64>>,
}

fn residual(a: ResidualArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    if let Some(tol) = a.tol {
        if !(tol >= 0.0) {
            return Err(CliError::usage("residual", format!("tol must be >= 0, got {tol}")));
        }
    }
    let g = read_grid(&a.trajectory)?;
    let report = residual::residual_functional(&problem, &g)?;
    let is_solution = a.tol.map(|tol| report.value <= tol);
    let out = ResidualOut {
        label: problem.label().to_string(),
        m: g.steps(),
        residual: report.value,
        argmax_t: report.argmax_t,
        quadrature_slack: report.quadrature_slack,
        tol: a.tol,
        is_solution,
        node_residuals: a.verbose.then_some(report.node_residuals),
    };
    write_report(&out, &a.report)?;
    Ok(if is_solution == Some(false) { Status::Negative } else { Status::Ok })
}

#[derive(Serialize)]
struct Rung {
    k: usize,
    integral: f64,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct ExtremalOut {
    label: String,
    side: Side,
    k_schedule: Vec<usize>,
    m: usize,
    tol: f64,
    ks: Vec<usize>,
    integrals: Vec<f64>,
    final_residual: f64,
    quadrature_slack: f64,
    converged: bool,
    monotonicity_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ladder: Option<Vec<Rung>>,
}

fn extremal(a: ExtremalArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    check_positive("extremal", "tol", a.tol)?;
    let schedule = extremal::doubling_schedule(a.kmin, a.kmax)?;
    let result = match a.side {
        SideArg::Greatest => extremal::greatest_solution(&problem, &schedule, a.grid, a.tol)?,
        SideArg::Least => extremal::least_solution(&problem, &schedule, a.grid, a.tol)?,
    };
    let slack = residual::residual_functional(&problem, &result.approx)?.quadrature_slack;
    write_trajectory(&result.approx, &a.output.out)?;
    let out = ExtremalOut {
        label: problem.label().to_string(),
        side: result.side,
        k_schedule: schedule,
        m: a.grid,
        tol: a.tol,
        ks: result.ladder.iter().map(|r| r.0).collect(),
        integrals: result.integrals.clone(),
        final_residual: result.final_residual,
        quadrature_slack: slack,
        converged: result.converged,
        monotonicity_violation: result.monotonicity_violation,
        ladder: a.verbose.then(|| {
            result
                .ladder
                .iter()
                .zip(&result.integrals)
                .map(|((k, g), &integral)| Rung {
                    k: *k,
                    integral,
                    values: g.component(0),
                })
                .collect()
        }),
    };
    write_report(&out, &a.output.report)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct VerifyOut {
    label: String,
    m: usize,
    #[serde(flatten)]
    certificate: BoundCertificate,
}

fn verify(a: VerifyArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    if !(a.delta >= 0.0 && a.delta.is_finite()) {
        return Err(CliError::usage("bounds", format!("delta must be >= 0, got {}", a.delta)));
    }
    let g = read_grid(&a.candidate)?;
    let kind = match a.kind {
        KindArg::Lower => BoundKind::Lower,
        KindArg::Upper => BoundKind::Upper,
    };
    let certificate = bounds::verify(&problem, &g, kind, a.strict, a.delta)?;
    let verdict = certificate.verdict;
    let out = VerifyOut {
        label: problem.label().to_string(),
        m: g.steps(),
        certificate,
    };
    write_report(&out, &a.report)?;
    Ok(if verdict { Status::Ok } else { Status::Negative })
}

#[derive(Serialize)]
struct BracketOut {
    label: String,
    eps: f64,
    tol_g: f64,
    m: usize,
    mesh: f64,
    lipschitz: f64,
    segments: usize,
    max_segment_defect: f64,
    residual: f64,
    argmax_t: f64,
    quadrature_slack: f64,
    below_eps: bool,
}

fn bracket(a: BracketArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    check_positive("bounds", "eps", a.eps)?;
    check_positive("bounds", "tol-g", a.tol_g)?;
    let alpha = read_grid(&a.lower)?;
    let beta = read_grid(&a.upper)?;
    let options = SegmentOptions {
        tol_g: a.tol_g,
        ..SegmentOptions::default()
    };
    let chain = bounds::goodman_chain(&problem, &alpha, &beta, a.eps, options)?;
    let below_eps = chain.residual.value < a.eps + chain.residual.quadrature_slack;
    write_trajectory(&chain.trajectory, &a.output.out)?;
    let out = BracketOut {
        label: problem.label().to_string(),
        eps: a.eps,
        tol_g: a.tol_g,
        m: chain.trajectory.steps(),
        mesh: chain.mesh,
        lipschitz: chain.lipschitz,
        segments: chain.partition.len() - 1,
        max_segment_defect: chain.max_segment_defect,
        residual: chain.residual.value,
        argmax_t: chain.residual.argmax_t,
        quadrature_slack: chain.residual.quadrature_slack,
        below_eps,
    };
    write_report(&out, &a.output.report)?;
    Ok(if below_eps { Status::Ok } else { Status::Negative })
}

#[derive(Serialize)]
struct QuasiOut {
    label: String,
    samples: usize,
    #[serde(flatten)]
    report: QuasiReport,
}

fn quasimono(a: QuasimonoArgs) -> Result<Status, CliError> {
    let problem = load_problem(&a.problem)?;
    let report = bounds::check_quasimonotone(&problem, a.samples, a.seed)?;
    let verdict = report.verdict;
    let out = QuasiOut {
        label: problem.label().to_string(),
        samples: a.samples,
        report,
    };
    write_report(&out, &a.report)?;
    Ok(if verdict { Status::Ok } else { Status::Negative })
}

fn corpus(a: CorpusArgs) -> Result<Status, CliError> {
    if a.list {
        let mut out = io::stdout().lock();
        for name in corpus::NAMES {
            let entry = corpus::get(name)?;
            writeln!(out, "{name}\t{}", entry.notes).map_err(|e| CliError::usage("cli", e))?;
        }
        return Ok(Status::Ok);
    }
    let name = a.dump.expect("clap enforces --list or --dump");
    let entry = corpus::get(&name)?;
    let mut out = sink(&a.out)?;
    writeln!(out, "{}", entry.problem.to_json())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::usage("cli", e))?;
    Ok(Status::Ok)
}
