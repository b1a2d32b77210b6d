//! Situational (S8D) annotation of posts through an LLM backend.
//!
//! One prompt per post and dimension, built from a fixed few-shot template.
//! Completions are parsed leniently (surrounding prose is tolerated), checked
//! against the post text, and cached by a hash of backend identity and prompt.

mod backend;
mod parse;
mod prompt;
mod run;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{cache_key, BackendError, HttpBackend, HttpConfig, LlmBackend, MockBackend, ReplayBackend, ResponseCache};
pub use parse::parse_response;
pub use prompt::{build_prompt, render_exemplars, render_items, DimensionSpec, ExemplarAnnotation, SpecSet, PROMPT_TEMPLATE};
pub use run::{
    annotate_corpus, annotate_post, scores_to_table, AnnotationReport, Annotator, PostFailure, FORMAT_REMINDER,
};

/// The eight situation dimensions, in column order.
pub const S8D_DIMENSIONS: [&str; 8] =
    ["duty", "intellect", "adversity", "mating", "positivity", "negativity", "deception", "sociality"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Duty,
    Intellect,
    Adversity,
    Mating,
    Positivity,
    Negativity,
    Deception,
    Sociality,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::Duty,
        Dimension::Intellect,
        Dimension::Adversity,
        Dimension::Mating,
        Dimension::Positivity,
        Dimension::Negativity,
        Dimension::Deception,
        Dimension::Sociality,
    ];

    /// Lower-case key, also the expected JSON rating key.
    pub fn key(self) -> &'static str {
        S8D_DIMENSIONS[self.index()]
    }

    pub fn index(self) -> usize {
        Dimension::ALL.iter().position(|d| *d == self).expect("listed")
    }

    /// Capitalized name used in prompts.
    pub fn title(self) -> &'static str {
        match self {
            Dimension::Duty => "Duty",
            Dimension::Intellect => "Intellect",
            Dimension::Adversity => "Adversity",
            Dimension::Mating => "Mating",
            Dimension::Positivity => "Positivity",
            Dimension::Negativity => "Negativity",
            Dimension::Deception => "Deception",
            Dimension::Sociality => "Sociality",
        }
    }

    pub fn from_key(key: &str) -> Option<Dimension> {
        let k = key.trim().to_lowercase();
        Dimension::ALL.into_iter().find(|d| d.key() == k)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One parsed rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub dimension: Dimension,
    pub rating: u8,
    pub reasoning: String,
    /// Spans confirmed to occur verbatim in the annotated text.
    pub supporting_spans: Vec<String>,
    /// Spans the model returned that were not found in the text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_spans: Vec<String>,
}

/// All eight ratings for one post, in dimension order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct S8dScores {
    pub post_id: String,
    pub scores: Vec<DimensionScore>,
}

impl S8dScores {
    pub fn rating(&self, dimension: Dimension) -> Option<u8> {
        self.scores.iter().find(|s| s.dimension == dimension).map(|s| s.rating)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no JSON object found in the response")]
    NoJsonFound,
    #[error("JSON object has no rating")]
    RatingMissing,
    #[error("rating {0:?} is not an integer")]
    InvalidRating(String),
    #[error("rating {0} outside 1..=9")]
    RatingOutOfRange(i64),
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("incomplete dimension spec: {0}")]
    IncompleteSpec(String),
    #[error("target text is empty")]
    EmptyText,
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("no valid response after {attempts} attempt(s); last error: {last}")]
    ExhaustedRetries { attempts: usize, last: ParseError },
    #[error("malformed spec file {path}: {message}")]
    MalformedSpecFile { path: String, message: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
