use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e} > {tol:.1e})")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not unitary (deviation {deviation:.3e} > {tol:.1e})")]
    NotUnitary { deviation: f64, tol: f64 },

    #[error("matrix is not a projector (deviation {deviation:.3e} > {tol:.1e})")]
    NotProjector { deviation: f64, tol: f64 },

    #[error("state is not normalized (squared norm {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("weights are not normalized: sum of squares {sum_sq}")]
    WeightNormalization { sum_sq: f64 },

    #[error("eigenvalue {value} outside the admissible window [{lo}, {hi}]")]
    EigenvalueOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("degree bound violated at u={u}: |N_{side}(u)| = {degree} > {delta}")]
    DegreeBound {
        u: usize,
        side: char,
        degree: usize,
        delta: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("instance too large for exhaustive enumeration: n={n} > {max}")]
    TooLarge { n: usize, max: usize },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("no instance with gap <= {target} found after {attempts} attempts")]
    AttemptsExhausted { target: f64, attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bound violated: {0}")]
    BoundViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
