use thiserror::Error;

/// Errors surfaced by estimation, network construction and I/O.
#[derive(Error, Debug)]
pub enum Error {
    #[error("design matrix is numerically rank deficient (smallest R diagonal {smallest:.3e} vs largest {largest:.3e})")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("sigma_{{r+1}} = {sigma:.12} is too close to 1; the intersection dimension r = {r} is too small for the observed principal angles")]
    DegenerateAngle { r: usize, sigma: f64 },

    #[error("(r, s) = ({r}, {s}) split disagrees with the singular value pattern at index {index} (sigma = {sigma:.6})")]
    BadPartition { r: usize, s: usize, index: usize, sigma: f64 },

    #[error("no residual degrees of freedom: n - p - K + r = {df}")]
    DegreesOfFreedomExhausted { df: i64 },

    #[error("direction carries no identifiable signal (unit-noise standard error {se_unit:.3e})")]
    DegenerateDirection { se_unit: f64 },

    #[error("covariance of the network-effect coordinates is singular (eigenvalue {eigenvalue:.3e} below floor {floor:.3e})")]
    SingularGammaCovariance { eigenvalue: f64, floor: f64 },

    #[error("K - r = 0: no network-only component to test")]
    NoNetworkComponent,

    #[error("community {label} is empty")]
    EmptyCommunity { label: usize },

    #[error("community {label} has zero total degree")]
    ZeroDegreeCommunity { label: usize },

    #[error("{count} isolated nodes present and dropping is disabled")]
    IsolatedNodes { count: usize },

    #[error("penalized system singular at every lambda in the grid")]
    SingularSystem,

    #[error("generated effects violate the model constraints: {detail}")]
    ConstraintViolation { detail: String },

    #[error("column norms of X deviate from sqrt(n) by more than 1% (column {column}: {norm:.4} vs {expected:.4}); standardize first")]
    UnstandardizedDesign { column: usize, norm: f64, expected: f64 },

    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },

    #[error("missing column `{name}`")]
    MissingColumn { name: String },

    #[error("response column `{name}` is not numeric at row {row}")]
    NonNumericResponse { name: String, row: usize },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("parse error in {path} line {line}: {detail}")]
    Parse { path: String, line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code bucket: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::MissingColumn { .. }
            | Error::NonNumericResponse { .. }
            | Error::InvalidConfig { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::RankDeficient { .. } => "rank_deficient",
            Error::DegenerateAngle { .. } => "degenerate_angle",
            Error::BadPartition { .. } => "bad_partition",
            Error::DegreesOfFreedomExhausted { .. } => "degrees_of_freedom_exhausted",
            Error::DegenerateDirection { .. } => "degenerate_direction",
            Error::SingularGammaCovariance { .. } => "singular_gamma_covariance",
            Error::NoNetworkComponent => "no_network_component",
            Error::EmptyCommunity { .. } => "empty_community",
            Error::ZeroDegreeCommunity { .. } => "zero_degree_community",
            Error::IsolatedNodes { .. } => "isolated_nodes",
            Error::SingularSystem => "singular_system",
            Error::ConstraintViolation { .. } => "constraint_violation",
            Error::UnstandardizedDesign { .. } => "unstandardized_design",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::MissingColumn { .. } => "missing_column",
            Error::NonNumericResponse { .. } => "non_numeric_response",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
        }
    }
}
