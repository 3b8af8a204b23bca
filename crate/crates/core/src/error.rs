use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain or inconsistent with
    /// another input.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Two atoms sit at (numerically) the blockade radius, so the edge
    /// decision is ambiguous.
    #[error(
        "ambiguous blockade: atoms {j} and {k} are {distance} um apart, within tolerance of r_b = {r_b} um"
    )]
    AmbiguousBlockade {
        j: usize,
        k: usize,
        distance: f64,
        r_b: f64,
    },

    #[error("capacity error: {n} qubits exceeds the dense-matrix limit of {max}")]
    Capacity { n: usize, max: usize },

    /// Input failed a structural check (e.g. non-Hermitian matrix).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sweep point {index} failed: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
