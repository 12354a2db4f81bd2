use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong inside the pipeline.
///
/// Variants are grouped by the stage that raises them; [`Error::category`]
/// maps them onto the coarse classes the CLI turns into exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // ingest
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}: {field} = {value} is out of range ({reason})")]
    Range {
        row: usize,
        field: String,
        value: String,
        reason: String,
    },
    #[error("row {row}: duplicate entry for {key}")]
    Duplicate { row: usize, key: String },
    #[error("record for student {student} on {date} has no grade")]
    OrphanRecord { student: String, date: String },
    #[error("record for student {student} dated {date} lies outside {start}..={end}")]
    Date {
        student: String,
        date: String,
        start: String,
        end: String,
    },
    #[error("record belongs to trial {found}, expected {expected}")]
    TrialMismatch { expected: String, found: String },

    // aggregate
    #[error("no aggregated sample survived the window policy")]
    EmptyWindowSet,
    #[error("median split needs at least 2 graded students, got {0}")]
    InsufficientGrades(usize),
    #[error("no label for student {0}")]
    MissingLabel(String),

    // learners
    #[error("training data holds a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("SVM solver did not converge within {0} iterations")]
    Convergence(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("unsupported parameter value {name} = {value}")]
    UnsupportedParam { name: String, value: String },
    #[error("invalid sample weights: {0}")]
    InvalidWeights(String),
    #[error("impurity of an empty node is undefined")]
    EmptyNode,
    #[error("degenerate boosting stage (weighted error {0})")]
    DegenerateStage(f64),

    // evaluate / tune
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<Error> },
    #[error("no builtin grid for {0}")]
    UnknownKind(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("every grid cell failed")]
    NoViableCell,
    #[error("cost weight candidates must include 1.0")]
    MissingUnitWeight,

    // synth
    #[error("invalid generator config: {0}")]
    Config(String),
}

/// Coarse error class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Schema,
    Semantic,
    Runtime,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Schema(_) => Category::Schema,
            Error::Fold { source, .. } => source.category(),
            Error::Convergence(_) | Error::DegenerateStage(_) => Category::Runtime,
            _ => Category::Semantic,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
