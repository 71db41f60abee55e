use thiserror::Error;

/// Errors produced by the certificate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation
    /// (division by an interval containing zero, nonpositive eigenvalue
    /// bound, nonpositive viscosity, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A rigorous containment or certification step could not be completed.
    /// The payload describes the failed check and, where available, the
    /// residual or gap that blocked certification.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    /// Mesh construction or refinement failed (non-conforming occupancy,
    /// disconnected domain, broken facet matching).
    #[error("mesh error: {0}")]
    Mesh(String),

    /// Degenerate element geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Unsupported or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Finite element space construction failed (rank deficiency,
    /// dimension mismatch against the divergence constraint).
    #[error("space error: {0}")]
    Space(String),

    /// The floating-point approximation stage diverged.
    #[error("solve error: {0}")]
    Solve(String),

    /// File I/O while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed artifact or config file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
