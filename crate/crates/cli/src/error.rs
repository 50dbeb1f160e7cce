use std::fmt;

use peano_core::bounds::BoundsError;
use peano_core::corpus::CorpusError;
use peano_core::extremal::ExtremalError;
use peano_core::gridfn::GridError;
use peano_core::integrators::IntegratorError;
use peano_core::problem::ProblemError;
use peano_core::residual::ResidualError;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Negative = 1,
    Usage = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub module: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(module: &'static str, message: impl fmt::Display) -> Self {
        CliError {
            status: Status::Usage,
            module,
            message: message.to_string(),
        }
    }

    pub fn numerical(module: &'static str, message: impl fmt::Display) -> Self {
        CliError {
            status: Status::Numerical,
            module,
            message: message.to_string(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::usage("cli", format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.module, self.message)
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Eval { .. } => CliError::numerical("problem", e),
            _ => CliError::usage("problem", e),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Problem(inner) => inner.into(),
            _ => CliError::usage("gridfn", e),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::usage("corpus", e)
    }
}

impl From<ResidualError> for CliError {
    fn from(e: ResidualError) -> Self {
        match e {
            ResidualError::Grid(inner) => inner.into(),
            ResidualError::Eval { .. } => CliError::numerical("residual", e),
        }
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::InvalidParams(_) => CliError::usage("integrators", e),
            IntegratorError::Problem(inner) => inner.into(),
            IntegratorError::Grid(inner) => inner.into(),
            IntegratorError::Residual(inner) => inner.into(),
            IntegratorError::Eval { .. }
            | IntegratorError::BoxExit { .. }
            | IntegratorError::BoundExceeded { .. } => CliError::numerical("integrators", e),
        }
    }
}

impl From<ExtremalError> for CliError {
    fn from(e: ExtremalError) -> Self {
        match e {
            ExtremalError::NotScalar(_) | ExtremalError::Schedule(_) => CliError::usage("extremal", e),
            ExtremalError::Rung { .. } | ExtremalError::NonMonotone { .. } => {
                CliError::numerical("extremal", e)
            }
            ExtremalError::Problem(inner) => inner.into(),
            ExtremalError::Grid(inner) => inner.into(),
            ExtremalError::Residual(inner) => inner.into(),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::NotScalar(_) | BoundsError::Invalid(_) | BoundsError::InfiniteBox => {
                CliError::usage("bounds", e)
            }
            BoundsError::Problem(inner) => inner.into(),
            BoundsError::Grid(inner) => inner.into(),
            BoundsError::Residual(inner) => inner.into(),
            BoundsError::Eval { .. }
            | BoundsError::Bracket { .. }
            | BoundsError::Bisection { .. }
            | BoundsError::Segment { .. } => CliError::numerical("bounds", e),
        }
    }
}
