use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
    #[error("least-squares system is rank deficient (condition estimate {0:.3e})")]
    RankDeficient(f64),
    #[error("piece {piece} has {have} samples, needs at least {need}")]
    InsufficientSamples { piece: usize, have: usize, need: usize },
    #[error("length mismatch: expected at least {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degree {0} is too small")]
    DegreeTooSmall(usize),
    #[error("symmetric eigensolver did not converge in {0} sweeps")]
    EigenFailure(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("step sizes violate tau*sigma*L^2 <= 1 (tau={tau}, sigma={sigma}, L={norm})")]
    StepSizeViolation { tau: f64, sigma: f64, norm: f64 },
    #[error("solver diverged at iteration {0}")]
    Diverged(usize),
    #[error("dual is infeasible: {0}")]
    InfeasibleDual(String),
    #[error("vertex {0} carries no mass")]
    DegenerateMass(usize),
    #[error("graph is not a chain")]
    NotAChain,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
