use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit {qubit} out of range for a {qubit_count}-qubit graph")]
    QubitOutOfRange { qubit: usize, qubit_count: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is disconnected: {0}")]
    Disconnected(String),
    #[error("qubit {0} has no incident edges")]
    IsolatedQubit(usize),
    #[error("invalid qubit subset: {0}")]
    InvalidSubset(String),
    #[error("invalid calibration data: {0}")]
    Calibration(String),
    #[error("calibration csv line {line}: {message}")]
    CalibrationCsv { line: u64, message: String },
    #[error("qasm line {line}: {message}")]
    Qasm { line: usize, message: String },
    #[error("invalid misreport plan: {0}")]
    InvalidPlan(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("scheduling: {0}")]
    Scheduling(String),
    #[error("detection: {0}")]
    Detection(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure stems from user-supplied configuration rather
    /// than from the data being processed.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidPlan(_))
    }
}
