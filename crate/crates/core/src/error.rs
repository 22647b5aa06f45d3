use thiserror::Error;

/// Errors produced by simulation, analysis and statistics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite state in `{field}` at t = {t:.6} s")]
    NonFiniteState { field: String, t: f64 },
    #[error("termination target not reached within {max_time} s (progress {progress:.3} m)")]
    TerminationNotReached { max_time: f64, progress: f64 },
    #[error("gait phase {0} outside [0, 1)")]
    PhaseOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cutoff {fc} Hz is at or above Nyquist for fs = {fs} Hz")]
    CutoffAboveNyquist { fc: f64, fs: f64 },
    #[error("series of length {len} too short (need more than {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("no gait events found")]
    NoEventsFound,
    #[error("degenerate cycle of duration {0:.3} s")]
    DegenerateCycle(f64),
    #[error("need at least {need} cycles, found {found}")]
    TooFewCycles { need: usize, found: usize },
    #[error("steady-walking window is empty")]
    WindowTooShort,
    #[error("speed estimator needs at least two samples")]
    InsufficientHistory,
    #[error("residuals are identically zero")]
    DegenerateResiduals,
    #[error("threshold search did not converge in [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64 },
    #[error("need at least {need} permutations, got {got}")]
    TooFewPermutations { need: usize, got: usize },
    #[error("invalid field data: {0}")]
    InvalidField(String),
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            msg: err.to_string(),
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            msg: err.to_string(),
        }
    }
}
