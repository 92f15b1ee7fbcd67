use thiserror::Error;

/// Errors produced by the signal chain, the receiver and the evaluation tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token id {0}")]
    InvalidTokenId(usize),
    #[error("harmonic above Nyquist: {freq} Hz at {sample_rate} Hz sample rate")]
    HarmonicAboveNyquist { freq: f64, sample_rate: u32 },
    #[error("empty message")]
    EmptyMessage,
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("cannot compute SNR against silence")]
    SilentSignal,
    #[error("message too short: {len} samples, need at least {chip_len}")]
    MessageTooShort { len: usize, chip_len: usize },
    #[error("undefined CER: empty reference")]
    UndefinedCer,
    #[error("undefined WER: reference has no words")]
    UndefinedWer,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid vocabulary table: {0}")]
    InvalidVocab(String),
    #[error("malformed mel file: {0}")]
    MalformedMel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
