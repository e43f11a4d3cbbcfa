use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("permutation is reducible")]
    Reducible,
    #[error("permutation is not of rotation type")]
    NotRotationType,
    #[error("Keane violation at step {step}")]
    KeaneViolation { step: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("path divergence at step {step}: expected type {expected}, found {found}")]
    PathDivergence { step: usize, expected: u8, found: u8 },
    #[error("height cap exceeded at level {level}: {height}")]
    HeightCap { level: usize, height: f64 },
    #[error("ill-conditioned ({what}): condition number {cond:e}")]
    IllConditioned { what: &'static str, cond: f64 },
    #[error("{module} failure at level {level}: {cause}")]
    Diagnostic {
        module: &'static str,
        level: usize,
        cause: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
