use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// The variants fall into three families that the CLI maps onto stable exit
/// codes: configuration/domain problems (1), invariant violations (2) and
/// numerical failures (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-posed SPDE: gamma = {gamma} must exceed beta/(2-nu) = {threshold}")]
    IllPosed { gamma: f64, threshold: f64 },

    #[error("slnd-unknown: no strong local non-determinism constant is available for this process")]
    SlndUnknown,

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("quadrature-nonconvergence: error estimate {achieved:.3e} exceeds tolerance {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("covariance matrix is not positive semidefinite after jitter {jitter:.3e}; tighten the quadrature rel_tol")]
    NonPsd { jitter: f64 },

    #[error("FFT length overflow for {points} grid points")]
    FftOverflow { points: usize },

    #[error("regime mismatch: expected {expected} regime, got beta = {beta} with alpha = {alpha}")]
    RegimeMismatch {
        expected: &'static str,
        alpha: f64,
        beta: f64,
    },

    #[error("insufficient-survivors: horizon {horizon} has {survivors} survivors (need at least {floor})")]
    InsufficientSurvivors {
        horizon: f64,
        survivors: u64,
        floor: u64,
    },

    #[error("window-too-small: {points} usable horizons, need at least 3")]
    WindowTooSmall { points: usize },

    #[error("divergent-parameter: Kummer b = {0} is a non-positive integer")]
    DivergentParameter(f64),

    #[error("root-not-bracketed for mu = {mu} on (0, {limit}]")]
    RootNotBracketed { mu: f64, limit: f64 },

    #[error("out-of-range: c = {c} lies outside the invertible range [{lo}, {hi}]")]
    OutOfRange { c: f64, lo: f64, hi: f64 },

    #[error("empty grid: no grid point at or after time 1")]
    EmptyGrid,

    #[error("nu-not-one: the comparison bound requires nu = 1 (got {0})")]
    NuNotOne(f64),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code: 1 config, 2 invariant violation, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            Error::QuadratureNonConvergence { .. }
            | Error::NonPsd { .. }
            | Error::FftOverflow { .. }
            | Error::RootNotBracketed { .. }
            | Error::Divergent(_) => 3,
            _ => 1,
        }
    }
}
