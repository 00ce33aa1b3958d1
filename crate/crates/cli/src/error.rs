use std::fmt;

use latent_adjust::LeappError;

/// Failure of a command. Bad input exits with 2, numerical trouble with 3.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<LeappError> for CliError {
    fn from(e: LeappError) -> Self {
        match e {
            LeappError::SingularDesign
            | LeappError::ZeroSpread
            | LeappError::Infeasible
            | LeappError::NumericalFailure(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
