use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // audio
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no frames")]
    EmptyAudio,

    // dsp
    #[error("clip sample rate {clip_hz} Hz does not match config rate {config_hz} Hz")]
    ConfigMismatch { clip_hz: u32, config_hz: u32 },
    #[error("rescale fit over an empty training set")]
    EmptyTrainingSet,
    #[error("rescale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("clip of {len} samples is shorter than one {frame}-sample frame")]
    ClipTooShort { len: usize, frame: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // augment
    #[error("noise augmentation enabled but the noise bank is empty")]
    EmptyNoiseBank,
    #[error("{axis} mask width {width} exceeds patch extent {extent}")]
    MaskWiderThanPatch { axis: &'static str, width: usize, extent: usize },

    // models
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    // dataset
    #[error("manifest schema error at row {row}: {message}")]
    SchemaError { row: usize, message: String },
    #[error("duplicate individual id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("missing audio files: {}", .0.iter().map(|(row, p)| format!("row {row}: {}", p.display())).collect::<Vec<_>>().join("; "))]
    MissingAudio(Vec<(usize, PathBuf)>),
    #[error("facility {facility} has {positives} positives / {negatives} negatives; need at least {required} of each")]
    InsufficientClassCount { facility: String, positives: usize, negatives: usize, required: usize },

    // inference
    #[error("expected {expected} file scores per individual, got {got}")]
    WrongFileCount { expected: usize, got: usize },

    // eval
    #[error("ROC requires both classes; got {positives} positives and {negatives} negatives")]
    SingleClassInput { positives: usize, negatives: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("zero variance across folds with mean {mean} != null value {null}")]
    ZeroVariance { mean: f64, null: f64 },

    // ensemble
    #[error("rank ensembling needs at least two models")]
    SingleModel,
    #[error("leakage: individual {id:?} {}", match fold { Some(f) => format!("was scored by fold {f}, which trained on it"), None => "has no out-of-fold prediction".to_string() })]
    LeakageDetected { id: String, fold: Option<usize> },
    #[error("prediction matrix: {0}")]
    InvalidPredictions(String),

    // triage
    #[error("degenerate triage: referral fraction {denominator} <= 0 (nobody is sent for testing)")]
    DegenerateTriage { denominator: f64 },
    #[error("invalid triage parameter: {0}")]
    InvalidTriageParams(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// True for errors caused by bad user input (manifests, configs, CLI values)
    /// rather than runtime failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::SchemaError { .. }
                | Error::DuplicateId { .. }
                | Error::MissingAudio(_)
                | Error::InvalidConfig(_)
                | Error::Toml(_)
                | Error::InsufficientClassCount { .. }
                | Error::InvalidTriageParams(_)
                | Error::DegenerateTriage { .. }
        )
    }
}
