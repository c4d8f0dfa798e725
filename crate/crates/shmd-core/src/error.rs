//! Crate-wide error type.

use crate::dataset::Label;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value fails validation before any work starts.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Shapes disagree (feature length, weight matrix dims, matrix sizes).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A (label, family) cell is too small to deal one trace into each fold.
    #[error("cannot balance folds: cell {cell} has {have} trace(s), need at least {need}")]
    FoldUnderfull {
        cell: String,
        have: usize,
        need: usize,
    },

    /// Training data carries only one of the two labels.
    #[error("training data contains only {0} examples; both labels are required")]
    SingleClassData(Label),

    /// The training loss left the reals; reported with the epoch that broke.
    #[error("training diverged at epoch {epoch}: loss {loss} is not finite")]
    TrainingDiverged { epoch: usize, loss: f64 },

    /// Weights fall outside the representable fixed-point range.
    #[error("{count} weight(s) outside the fixed-point range ±{limit}; first offenders: {}", offenders.join(", "))]
    QuantizeRange {
        count: usize,
        limit: f64,
        offenders: Vec<String>,
    },

    /// A trace file line failed to parse or validate (1-based line number).
    #[error("trace file line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    /// A model file failed to parse or validate.
    #[error("model file: {0}")]
    ModelFile(String),

    /// A learnability bounds check failed; the message carries every
    /// input needed to replay the violation.
    #[error("bounds sandwich violated: {0}")]
    Sandwich(String),

    /// A sweep repetition failed; carries enough context to replay it.
    #[error("sweep aborted at fault_rate {rate}, repetition {rep}, seed {seed}: {source}")]
    Sweep {
        rate: f64,
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
