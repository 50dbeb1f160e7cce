use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "peano", version, about = "Approximate, extremal and bracketed solutions of initial value problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate with the Tonelli scheme or the Euler polygon and certify the residual.
    Solve(SolveArgs),
    /// Residual of a trajectory read from CSV.
    Residual(ResidualArgs),
    /// Least or greatest solution of a scalar problem.
    Extremal(ExtremalArgs),
    /// Check a candidate CSV as a lower or upper solution.
    Verify(VerifyArgs),
    /// Approximate solution chained between a lower and an upper solution.
    Bracket(BracketArgs),
    /// Search for violations of quasimonotonicity.
    Quasimono(QuasimonoArgs),
    /// List or dump the built-in problems.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Built-in problem name or path to a JSON problem file.
    #[arg(long)]
    pub problem: String,

    /// Replace f by its truncation outside the box (radius becomes infinite).
    #[arg(long)]
    pub truncate: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Trajectory CSV destination (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tonelli,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Least,
    Greatest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Lower,
    Upper,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[arg(long, value_enum, default_value_t = MethodArg::Tonelli)]
    pub method: MethodArg,

    /// Delay divisor for the Tonelli scheme.
    #[arg(long, default_value_t = 16)]
    pub k: usize,

    /// Grid steps on [t0, t0 + c] (default 100 k).
    #[arg(long)]
    pub grid: Option<usize>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Trajectory CSV with header t,y1,...,yn.
    #[arg(long)]
    pub trajectory: PathBuf,

    /// Accept the trajectory as a solution when the residual is at most this.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Include the residual at every node.
    #[arg(long)]
    pub verbose: bool,

    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtremalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[arg(long, value_enum)]
    pub side: SideArg,

    /// First rung; later rungs double k up to --kmax.
    #[arg(long, default_value_t = 4)]
    pub kmin: usize,

    #[arg(long, default_value_t = 1024)]
    pub kmax: usize,

    /// Grid steps shared by every rung.
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,

    /// Stop once consecutive rungs are this close.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,

    /// Include every rung in the report.
    #[arg(long)]
    pub verbose: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Candidate CSV with header t,y1.
    #[arg(long)]
    pub candidate: PathBuf,

    #[arg(long, value_enum)]
    pub kind: KindArg,

    /// Require the differential inequality with margin above --delta.
    #[arg(long)]
    pub strict: bool,

    #[arg(long, default_value_t = peano_core::bounds::DEFAULT_DELTA_STRICT)]
    pub delta: f64,

    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BracketArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Lower solution CSV.
    #[arg(long)]
    pub lower: PathBuf,

    /// Upper solution CSV on the same grid.
    #[arg(long)]
    pub upper: PathBuf,

    #[arg(long)]
    pub eps: f64,

    /// Bisection tolerance on each segment.
    #[arg(long, default_value_t = peano_core::bounds::DEFAULT_TOL_G)]
    pub tol_g: f64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct QuasimonoArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// JSON report destination (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Print the available names.
    #[arg(long, required_unless_present = "dump", conflicts_with = "dump")]
    pub list: bool,

    /// Print the problem file of a built-in problem.
    #[arg(long, value_name = "NAME")]
    pub dump: Option<String>,

    /// Destination for --dump (stdout if omitted).
    #[arg(long, requires = "dump")]
    pub out: Option<PathBuf>,
}
