use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: |a[{i}][{j}] - conj(a[{j}][{i}])| = {deviation:e}")]
    NotHermitian { i: usize, j: usize, deviation: f64 },

    #[error("vector length {0} is not a triangular number n(n+1)/2")]
    NotTriangular(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("occupation p = {p} must satisfy 1 <= p < n = {n}")]
    InvalidOccupation { p: usize, n: usize },

    /// The occupied and virtual eigenvalues touch, so the density matrix is not
    /// a well-defined function of the operator.
    #[error("zero gap: lambda_{p} and lambda_{next} differ by {gap:e} (the occupied/virtual split is not unique)", next = p + 1)]
    ZeroGap { p: usize, gap: f64 },

    #[error("zero gap at SCF iterate {iter}: {source}")]
    ZeroGapAtIterate {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("finite-difference perturbation along direction {direction} hit a zero gap")]
    FiniteDifferenceZeroGap { direction: usize },

    #[error("chemical potential search failed to bracket trace {target} in [{lo}, {hi}]")]
    ChemicalPotentialBracket { target: f64, lo: f64, hi: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error(
        "rate estimate needs {needed} error samples above the round-off floor but only {found} are usable; \
         lower the tolerance or raise max_iter"
    )]
    ShortTail { needed: usize, found: usize },

    #[error("{what} = {value} is out of range 0..={max}")]
    OutOfRange { what: &'static str, value: usize, max: usize },

    #[error("problem metadata is missing '{0}'")]
    MissingMeta(&'static str),

    #[error("unknown operator kind '{0}'")]
    UnknownOperator(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
