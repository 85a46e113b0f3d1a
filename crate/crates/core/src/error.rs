use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("assembly failed on {panel}: {reason}")]
    Assembly { panel: String, reason: String },

    #[error("eigen-solver failure: {reason} (worst relative residual {residual:.3e})")]
    Eigen { reason: String, residual: f64 },

    #[error("blow-up at t = {t:.6e}{}: |c|_inf = {norm:.3e}", path_suffix(*.path))]
    BlowUp { t: f64, norm: f64, path: Option<u64> },

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("check failed: {0}")]
    Check(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn path_suffix(path: Option<u64>) -> String {
    match path {
        Some(p) => format!(" on path {p}"),
        None => String::new(),
    }
}

impl Error {
    /// Process exit code for the CLI: 2 = config, 3 = numerical blow-up, 4 = check failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parameter(_) | Error::Domain(_) => 2,
            Error::BlowUp { .. } | Error::Eigen { .. } | Error::Assembly { .. } => 3,
            Error::Check(_) => 4,
            Error::Dimension { .. } | Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
