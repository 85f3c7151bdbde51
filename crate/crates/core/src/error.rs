use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped the way the CLI maps them to exit codes: input and
/// model-validation problems, then mathematical condition failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // --- input / shape problems ---
    #[error("matrix `{0}` must be square, got {1}x{2}")]
    NonSquare(&'static str, usize, usize),

    #[error("dimension mismatch in `{field}`: {detail}")]
    DimensionMismatch { field: String, detail: String },

    #[error("non-finite entry in `{0}`")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported schema version {0} (expected 1)")]
    SchemaVersionUnsupported(i64),

    // --- model validation ---
    #[error("A is not Hurwitz: eigenvalue with real part {0:e}")]
    NotStable(f64),

    #[error("(C, A) is not observable: observable subspace has dimension {observable} < {n}")]
    NotObservable { observable: usize, n: usize },

    #[error("(A, B) is not reachable: reachable subspace has dimension {reachable} < {n}")]
    NotReachable { reachable: usize, n: usize },

    #[error("rank(CB) = {rank} differs from the column count {cols} of B")]
    RankCBDeficient { rank: usize, cols: usize },

    #[error("B does not have full column rank: rank {rank} < {cols}")]
    BColumnDeficient { rank: usize, cols: usize },

    #[error("feedthrough D must vanish for a stochastic model")]
    NonzeroFeedthrough,

    // --- numerical kernels ---
    #[error("matrix is numerically singular")]
    SingularInput,

    #[error("principal logarithm does not exist: eigenvalue {re:e}{im:+e}i on the closed negative real axis")]
    ExistenceFailure { re: f64, im: f64 },

    #[error("Lyapunov operator is singular: {0}")]
    SpectrumConflict(String),

    #[error("matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPsd(f64),

    #[error("iteration did not converge in {0}")]
    NoConvergence(&'static str),

    // --- transfer functions ---
    #[error("s = {re}{im:+}i is numerically a pole")]
    PoleHit { re: f64, im: f64 },

    #[error("feedthrough D is not invertible")]
    DNotInvertible,

    // --- spectral ---
    #[error("spectral rank is inconsistent over the grid: {0}")]
    RankInconsistent(String),

    #[error("Phi_u is numerically singular at omega = {omega} (condition {cond:e})")]
    PhiUSingular { omega: f64, cond: f64 },

    // --- relation ---
    #[error("no row selection makes C0 B invertible")]
    NoAdmissibleSelection,

    #[error("row selection {rows:?} is not admissible: cond(C0 B) = {cond:e}")]
    InadmissibleSelection { rows: Vec<usize>, cond: f64 },

    #[error("{count} candidate selections exceed the enumeration cap {cap}")]
    SelectionCapExceeded { count: u128, cap: usize },

    // --- feedback ---
    #[error("I - F H is singular; the loop is not well posed")]
    AlgebraicLoopSingular,

    // --- sampling ---
    #[error("sampling period must be positive and finite, got {0}")]
    NonPositiveH(f64),

    #[error("A_d admits no principal logarithm")]
    LogFailure,

    #[error("Q_d = B_d B_d' is singular; not a sampled continuous-time model")]
    QdSingular,

    #[error("log(A_d) P + P log(A_d)' is not negative semidefinite (largest eigenvalue {0:e})")]
    NotSemidefinite(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// Short machine-readable name used in JSON reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonSquare(..) => "NonSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse(_) => "ParseError",
            Error::SchemaVersionUnsupported(_) => "SchemaVersionUnsupported",
            Error::NotStable(_) => "NotStable",
            Error::NotObservable { .. } => "NotObservable",
            Error::NotReachable { .. } => "NotReachable",
            Error::RankCBDeficient { .. } => "RankCBDeficient",
            Error::BColumnDeficient { .. } => "BColumnDeficient",
            Error::NonzeroFeedthrough => "NonzeroFeedthrough",
            Error::SingularInput => "SingularInput",
            Error::ExistenceFailure { .. } => "ExistenceFailure",
            Error::SpectrumConflict(_) => "SpectrumConflict",
            Error::NotPsd(_) => "NotPSD",
            Error::NoConvergence(_) => "NoConvergence",
            Error::PoleHit { .. } => "PoleHit",
            Error::DNotInvertible => "DNotInvertible",
            Error::RankInconsistent(_) => "RankInconsistent",
            Error::PhiUSingular { .. } => "PhiUSingular",
            Error::NoAdmissibleSelection => "NoAdmissibleSelection",
            Error::InadmissibleSelection { .. } => "InadmissibleSelection",
            Error::SelectionCapExceeded { .. } => "SelectionCapExceeded",
            Error::AlgebraicLoopSingular => "AlgebraicLoopSingular",
            Error::NonPositiveH(_) => "NonPositiveH",
            Error::LogFailure => "LogFailure",
            Error::QdSingular => "QdSingular",
            Error::NotSemidefinite(_) => "NotSemidefinite",
        }
    }
}
