use thiserror::Error;

#[derive(Debug, Error)]
pub enum AmgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("non-positive diagonal at row {0}")]
    NonPositiveDiagonal(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("local block of subspace {0} is singular")]
    SingularBlock(usize),
    #[error("interpolation row {0} has no admissible coarse neighbor")]
    EmptyRow(usize),
    #[error("coarsening stagnated on level {level}: {n} -> {n_coarse}")]
    Stagnation {
        level: usize,
        n: usize,
        n_coarse: usize,
    },
    #[error("dense path limited to n <= {cap}, got {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("breakdown: {0}")]
    Breakdown(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AmgError>;
