use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside admissible range [{lo}, {hi}] ({what})")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error(
        "kernel support eta = {eta} is not an integer multiple of dx = {dx} \
         (eta/dx = {ratio}); nearest admissible dx is {nearest}"
    )]
    Divisibility {
        eta: f64,
        dx: f64,
        ratio: f64,
        nearest: f64,
    },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("interface at x = 0 has no flux side")]
    UndefinedSide,

    #[error("time step {dt} exceeds the CFL bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("maximum principle violated: cell {cell} holds {value}")]
    MaxPrinciple { cell: i64, value: f64 },

    #[error("local flux is not unimodal on [0, rho_max]: {0}")]
    NotUnimodal(String),

    #[error("refinement ratio {ratio} between dx = {coarse} and dx_ref = {fine} is not an integer")]
    RefinementRatio { coarse: f64, fine: f64, ratio: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
