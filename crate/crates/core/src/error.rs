use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("price series `{symbol}` has {len} observations, need at least 2")]
    SeriesTooShort { symbol: String, len: usize },
    #[error("price series `{symbol}` has non-positive price {price} at index {index}")]
    NonPositivePrice {
        symbol: String,
        index: usize,
        price: f64,
    },
    #[error("timestamps of `{symbol}` are not strictly increasing at index {index}")]
    UnorderedTimestamps { symbol: String, index: usize },
    #[error("series share fewer than 2 common timestamps")]
    NoCommonTimestamps,
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("no risky price series supplied")]
    NoSeries,
    #[error("return {value} at row {row}, column {col} is not above -1")]
    ReturnOutOfDomain { row: usize, col: usize, value: f64 },
    #[error("riskless column {0} is not constant and non-negative")]
    InvalidRisklessColumn(usize),
    #[error("rebalancing period {n} needs more data than the {available} periods available")]
    PeriodExceedsData { n: usize, available: usize },
    #[error("rebalancing period must be at least 1")]
    ZeroPeriod,
    #[error("cost vector has length {got}, expected {expected}")]
    CostLengthMismatch { expected: usize, got: usize },
    #[error("cost {cost} for asset {index} is outside [0, {c_max}]")]
    InvalidCost { index: usize, cost: f64, c_max: f64 },
    #[error("cost ceiling {0} must lie in [0, 1)")]
    InvalidCostCeiling(f64),
    #[error("panel has no samples")]
    EmptyPanel,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights are not on the unit simplex: {0}")]
    NotOnSimplex(String),
    #[error("second moment matrix is not symmetric positive semidefinite")]
    InvalidMoments,
    #[error("{count} samples leave the log domain (1 + K'X <= 0)")]
    DomainViolation { count: usize },
    #[error("simplex lattice has {points} points, limit is {limit}")]
    LatticeTooLarge { points: u128, limit: u128 },
    #[error("grid step {0} must divide 1 into a positive whole number of cells")]
    InvalidGridStep(f64),
    #[error("asset {asset} has non-positive fee-adjusted gross return in sample {sample}")]
    NonPositiveGross { asset: usize, sample: usize },
    #[error("necessary survival test requires every cost to be strictly positive")]
    ZeroCost,
    #[error("weight {which} is not optimal: KKT residual {residual:e} exceeds {tol:e}")]
    InputNotOptimal {
        which: usize,
        residual: f64,
        tol: f64,
    },
    #[error("trajectory value {value} at index {index} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("trajectory needs at least 2 values")]
    TrajectoryTooShort,
    #[error("sliding window of {window} blocks exceeds the {available} blocks available")]
    WindowExceedsData { window: usize, available: usize },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("weight schedule covers {got} blocks, backtest needs {expected}")]
    ScheduleTooShort { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
