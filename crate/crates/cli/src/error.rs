use bladetrap::atomphys::AtomError;
use bladetrap::calibration::CalibrationError;
use bladetrap::crystal::{CrystalError, OverlayError};
use bladetrap::dynamics::DynamicsError;
use bladetrap::fieldsolver::FieldError;
use bladetrap::rfchain::RfError;
use bladetrap::sequencer::SequenceError;
use bladetrap::trapmodel::TrapError;

/// Failure of a CLI run, split by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    /// Prefixes the message with the input it came from.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn numerical(e: impl ToString) -> CliError {
    CliError::Numerical(e.to_string())
}

fn validation(e: impl ToString) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<TrapError> for CliError {
    fn from(e: TrapError) -> Self {
        match e {
            TrapError::UnstableConfiguration { .. } => numerical(e),
            _ => validation(e),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NonConvergence { .. } | FieldError::FitError(_) => numerical(e),
            _ => validation(e),
        }
    }
}

impl From<CrystalError> for CliError {
    fn from(e: CrystalError) -> Self {
        match e {
            CrystalError::InvalidInput(_) => validation(e),
            _ => numerical(e),
        }
    }
}

impl From<OverlayError> for CliError {
    fn from(e: OverlayError) -> Self {
        match e {
            OverlayError::Field(f) => f.into(),
            OverlayError::Crystal(c) => c.into(),
            OverlayError::Unconfined(_) => numerical(e),
        }
    }
}

impl From<AtomError> for CliError {
    fn from(e: AtomError) -> Self {
        validation(e)
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::InvalidData(_) => validation(e),
            CalibrationError::Field(f) => f.into(),
            _ => numerical(e),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Field(f) => f.into(),
            DynamicsError::Trap(t) => t.into(),
            DynamicsError::SingularBasis { .. } | DynamicsError::NoResonance { .. } => numerical(e),
            _ => validation(e),
        }
    }
}

impl From<RfError> for CliError {
    fn from(e: RfError) -> Self {
        match e {
            RfError::AmbiguousPlan { .. } | RfError::NoLine { .. } => numerical(e),
            _ => validation(e),
        }
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        validation(e)
    }
}
