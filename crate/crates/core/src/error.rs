use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = GameError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("unknown game `{name}`; valid names: {}", valid.join(", "))]
    UnknownGame { name: String, valid: Vec<&'static str> },

    #[error("parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {what} for player {player}")]
    Evaluation { what: &'static str, player: usize },

    #[error("non-finite Jacobian entry at ({row}, {col})")]
    JacobianEntry { row: usize, col: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("{0}")]
    Usage(String),

    #[error("line search stagnated at iteration {iteration}: no decrease of H down to step {min_step:e}")]
    Stagnation { iteration: usize, min_step: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("simulation failed at step {step}: {source}")]
    Simulation {
        step: usize,
        #[source]
        source: Box<GameError>,
        partial: Box<Trajectory>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GameError {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        GameError::Parameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        GameError::Dimension {
            context: context.into(),
            expected,
            found,
        }
    }

    /// Process exit code for the command-line driver: 1 for usage problems,
    /// 2 for numeric failures and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            GameError::UnknownGame { .. }
            | GameError::Parameter { .. }
            | GameError::Dimension { .. }
            | GameError::InvalidPoint(_)
            | GameError::Usage(_)
            | GameError::Config(_)
            | GameError::Json(_) => 1,
            GameError::Evaluation { .. }
            | GameError::JacobianEntry { .. }
            | GameError::Stagnation { .. }
            | GameError::Numeric(_)
            | GameError::Simulation { .. }
            | GameError::Io(_)
            | GameError::Csv(_) => 2,
        }
    }
}
