use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (|M - M^dagger|_F = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix does not have unit trace (trace = {trace})")]
    NotUnitTrace { trace: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue = {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not unitary (|U^dagger U - I|_F = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("{0} did not converge within the iteration budget")]
    ConvergenceFailure(&'static str),

    #[error("index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },

    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("enumeration needs {required} word evaluations, limit is {limit}")]
    BudgetExceeded { required: u64, limit: u64 },

    #[error("Gram matrix is numerically singular (|det| = {det:e})")]
    GramSingular { det: f64 },

    #[error("matrix is not in the span of the algebra basis (residual {residual:e})")]
    NotInSpan { residual: f64 },

    #[error("no intertwiner: the linear system has only the trivial solution")]
    NoIntertwiner,

    #[error("no nonsingular element found in a {dim}-dimensional intertwiner space after {draws} draws")]
    NoNonsingularElement { dim: usize, draws: usize },

    #[error("polar parts do not conjugate the reduced operators into each other (residual {residual:e})")]
    ExtractionMismatch { residual: f64 },

    #[error("invalid degeneracy profile: {0}")]
    InvalidProfile(String),
}
