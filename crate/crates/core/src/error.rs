use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curvature parameter {0} is outside the open interval (-1, 1)")]
    InvalidCurvature(f64),

    #[error("point with modulus {0} lies outside the closed unit disk")]
    OutsideDisk(f64),

    #[error("interior point required, got modulus {0}")]
    NotInterior(f64),

    #[error("fan-beam angle alpha = {0} is not in the inward range [-pi/2, pi/2]")]
    NotInward(f64),

    #[error("arclength t = {t} outside [0, {tau}]")]
    ArclengthOutOfRange { t: f64, tau: f64 },

    #[error("index (n = {n}, k = {k}) requires 0 <= k <= n")]
    InvalidIndex { n: i64, k: i64 },

    #[error("non-finite integrand value at arclength t = {t}")]
    NonFinite { t: f64 },

    #[error("at node (beta = {beta}, alpha = {alpha}): {source}")]
    AtNode {
        beta: f64,
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("band limit nmax = {nmax} is not resolvable with {nodes} fiber nodes")]
    Aliasing { nmax: usize, nodes: usize },

    #[error("no singular value accepted by the regularization")]
    EmptySpectrum,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("interpolation point (beta = {beta}, alpha = {alpha}) is outside the sampled range")]
    Interpolation { beta: f64, alpha: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
