use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action space too large: {count} compositions exceeds the cap of {cap}")]
    ActionSpaceTooLarge { count: u128, cap: usize },

    #[error("payoff tensor too large: {entries} entries exceeds the cap of {cap}")]
    TensorTooLarge { entries: u128, cap: usize },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("arity mismatch: expected {expected} players, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("prefix length {t} outside 1..={len}")]
    EmptyPrefix { t: usize, len: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid config at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("game is not seat-symmetric; specify a seat for exact one-vs-rest evaluation")]
    AsymmetricGame,

    #[error("QRE descent did not converge after {iterations} iterations (residual {residual:e}, exploitability {exploitability:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        exploitability: f64,
    },

    #[error("missing stage `{requested}` in {dir}; available: [{available}]")]
    MissingStage {
        requested: String,
        dir: PathBuf,
        available: String,
    },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::NotConverged { .. } | Error::Csv(_)
        )
    }
}
