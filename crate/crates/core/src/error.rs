use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("missing correlation entry for (phi index {phi}, psi index {psi})")]
    MissingCorrelation { phi: usize, psi: usize },

    #[error("missing correlation entries: {0:?}")]
    MissingCorrelations(Vec<(usize, usize)>),

    #[error("region model is not a partition of the chart: {0}")]
    Partition(String),

    #[error(
        "quadrature did not converge: error {error:.3e} > tolerance {tolerance:.3e}, worst subinterval [{lo}, {hi}]"
    )]
    Quadrature {
        error: f64,
        tolerance: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("schedule for {station} does not cover tick {tick}")]
    ScheduleRange { station: String, tick: i64 },

    #[error("input is not time-sorted at index {0}")]
    Unsorted(usize),

    #[error("truth tags are missing")]
    MissingTruth,

    #[error("seed layout is unusable: {0}")]
    Seed(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
