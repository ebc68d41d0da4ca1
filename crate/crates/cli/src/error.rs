use std::fmt;

use allee_core::AlleeError;

/// Exit 2 for bad input, 3 for a computation that could not finish.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) | Self::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<AlleeError> for CliError {
    fn from(e: AlleeError) -> Self {
        use AlleeError::*;
        let msg = e.to_string();
        match e {
            InvalidParameter(_)
            | StateOutOfRange { .. }
            | AssumptionFailure(_)
            | DegenerateDistribution
            | ComplexRoots { .. }
            | EmptyWindow { .. }
            | Config(_) => Self::Validation(msg),
            SingularSystem(_)
            | ToleranceUnachievable { .. }
            | BudgetExceeded { .. }
            | QuadratureFailure { .. }
            | IntegrationFailure(_)
            | NoPersistenceMode => Self::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(format!("output: {e}"))
    }
}
