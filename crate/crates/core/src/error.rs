use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The trial description is inconsistent. Each entry names the offending
    /// field path.
    #[error("invalid spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fixed-effect columns {columns:?} are linearly dependent on earlier columns")]
    RankDeficient { columns: Vec<usize> },

    #[error("numerically singular matrix: {0}")]
    Singular(String),

    #[error("eigen-solver did not converge on a {dim}x{dim} matrix (diagonal range [{min_diag:e}, {max_diag:e}])")]
    EigenNoConvergence {
        dim: usize,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("step generation stalled: {rejected} interchanges rejected by the feasibility predicate")]
    StepStalled { rejected: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no feasible start found after {attempts} attempts")]
    InfeasibleStart { attempts: usize },

    #[error("capacity mismatch: presence requires {required} experimental slots but locations offer {available} (deficit {})", *.required as i64 - *.available as i64)]
    CapacityMismatch { required: usize, available: usize },

    #[error("exhaustive search refused: dimension {0} exceeds the bound of 9")]
    OracleTooLarge(usize),
}

impl Error {
    /// Errors caused by bad numbers rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::EigenNoConvergence { .. } | Error::RankDeficient { .. }
        )
    }

    /// Errors meaning the requested design cannot exist or cannot be reached.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::StepStalled { .. } | Error::InfeasibleStart { .. } | Error::CapacityMismatch { .. }
        )
    }
}
