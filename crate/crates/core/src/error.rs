use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("column `{0}` missing from csv header")]
    MissingColumn(String),

    #[error("row {row}: unknown category `{value}` in column `{column}`")]
    UnknownCategory { row: usize, column: String, value: String },

    #[error("row {row}: cannot parse `{value}` in column `{column}` as a number")]
    UnparsableNumber { row: usize, column: String, value: String },

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate split: train={train}, test={test}")]
    DegenerateSplit { train: usize, test: usize },

    #[error("series too short: length {len}, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("predictor window {window} exceeds series of length {len}")]
    WindowExceedsSeries { window: usize, len: usize },

    #[error("state {state} out of range for cardinality {cardinality}")]
    StateOutOfRange { state: usize, cardinality: usize },

    #[error("too few observations for density estimation: {0}")]
    TooFewObservations(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("emi for columns ({col_a}, {col_b}): {source}")]
    EmiPair {
        col_a: String,
        col_b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("adjacency matrix is not symmetric at ({0}, {1})")]
    AsymmetricInput(usize, usize),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalarLoss((usize, usize)),

    #[error("tensor {0} is not recorded on this tape")]
    DetachedTensor(usize),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: total={total}, recon={recon}, kl={kl}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        total: f64,
        recon: f64,
        kl: f64,
    },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("too few samples for selection: {n} (need at least {min})")]
    TooFewSamples { n: usize, min: usize },

    #[error("invalid labeling policy: {0}")]
    InvalidPolicy(String),

    #[error("positive and negative selections overlap at sample {0}")]
    OverlappingSelection(usize),

    #[error("training selection has no {0} samples")]
    EmptyClass(&'static str),

    #[error("prediction and ground truth ids differ at position {position}")]
    IdMismatch { position: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("stale or missing artifact `{artifact}`: {reason}")]
    StaleArtifact { artifact: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags the error with the pipeline stage it came from, once.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
