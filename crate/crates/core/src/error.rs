use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("timestep {t} out of range [{min}, {max}]")]
    TimestepOutOfRange { t: usize, min: usize, max: usize },

    #[error("flow time {t} out of range")]
    FlowTimeOutOfRange { t: f64 },

    #[error("prediction kind mismatch: expected {expected:?}, got {actual:?}")]
    KindMismatch {
        expected: crate::denoiser::PredictionKind,
        actual: crate::denoiser::PredictionKind,
    },

    #[error("unknown condition id {0:?}")]
    UnknownCondition(Option<usize>),

    #[error("chunk index {index} out of range for {count} chunks")]
    ChunkOutOfRange { index: usize, count: usize },

    #[error("noise schedule corrupted at t={t}, t_prev={t_prev}: sigma^2={sigma_sq} exceeds 1-alpha_bar={budget}")]
    ScheduleCorruption {
        t: usize,
        t_prev: usize,
        sigma_sq: f64,
        budget: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("timestep {0} not present in trace")]
    TimestepNotInTrace(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
