//! Evaluation harness: fold planning, nested cross-validation, metrics,
//! threshold-based evidence extraction and span/timeline scoring.

mod cv;
mod evidence;
mod folds;
mod metrics;
mod timeline;

use thiserror::Error;

use crate::learner::LearnerError;

pub use cv::{nested_cv, CvResult, FoldRecord, PooledPrediction, Task};
pub use evidence::{extract_evidence, span_recall, SpanRecall, ThresholdConfig, DEFAULT_OVERLAP_MIN};
pub use folds::{make_folds, FoldPlan, Grouping};
pub use metrics::{auc, classification_report, log_loss, mse, pearson_r, ClassStats, ClassificationReport};
pub use timeline::{default_bands, timeline_mse, Band, TimelineMse};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("input is constant")]
    ConstantInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least {min} values required, found {found}")]
    TooShort { found: usize, min: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("value {value} outside [{low}, {high}]")]
    OutOfRange { value: f64, low: f64, high: f64 },
    #[error("no probability for sentence {0}")]
    MissingProbability(String),
    #[error("{groups} group(s) cannot fill {k} folds")]
    TooFewGroups { groups: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("penalty grid is empty")]
    EmptyGrid,
    #[error("row {0} is not covered by the fold plan")]
    UncoveredRow(String),
    #[error("no prediction for post {0}")]
    MissingPrediction(String),
    #[error("invalid threshold {0}; must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Fit(#[from] LearnerError),
}
