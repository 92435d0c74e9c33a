use thiserror::Error;
use vesselkit::VkError;

/// Failure classes, one per nonzero exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("condition failure: {0}")]
    Condition(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Condition(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Condition(_) => "condition",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(s) | CliError::Numerical(s) | CliError::Condition(s) => s,
        }
    }
}

impl From<VkError> for CliError {
    fn from(e: VkError) -> Self {
        let msg = e.to_string();
        match e {
            VkError::InvalidInput(_) | VkError::DimensionMismatch(_) | VkError::NonHermitian { .. } => {
                CliError::Input(msg)
            }
            VkError::NotEquivalent(_)
            | VkError::ConditionFailed(_)
            | VkError::InconsistentChain { .. }
            | VkError::NotMinimal { .. } => CliError::Condition(msg),
            _ => CliError::Numerical(msg),
        }
    }
}
