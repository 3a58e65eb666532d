use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("field `{field}` must be strictly positive (period {period})")]
    NonPositive { field: &'static str, period: usize },
    #[error("returns to scale {0} outside (0, 1]")]
    InvalidRts(f64),
    #[error("ratio bound {0} is below 1")]
    InvalidRatioBound(f64),
    #[error("zero revenue in period {0}")]
    ZeroRevenue(usize),
    #[error("zero expenditure on input {input} in period {period}")]
    ZeroExpenditure { input: usize, period: usize },
    #[error("evaluation point {0:?} lies outside the data support")]
    OutsideSupport(Vec<f64>),
    #[error("no feasible returns to scale: {0}")]
    NoFeasibleRts(String),
    #[error("empty conditional interval in {0}")]
    EmptyInterval(&'static str),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("covariance matrix is singular after regularization")]
    SingularCovariance,
    #[error("covariate matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("test statistic is not quasi-convex along the scan near theta = {0}")]
    NotQuasiConvex(f64),
    #[error("malformed row {row}, column `{column}`: {message}")]
    Malformed {
        row: usize,
        column: String,
        message: String,
    },
    #[error("header mismatch: {0}")]
    Header(String),
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corner solutions rejected for {rejected} of {attempts} draws")]
    TooManyCorners { rejected: usize, attempts: usize },
    #[error("bad chain dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
