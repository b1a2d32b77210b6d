//! Person-level trait feature space.
//!
//! Trait scores arrive as precomputed tables (CSV) and embeddings as JSON
//! lines. Resilience facets are scored here by prototype similarity and
//! collapsed into a one-factor composite; sentence-level tables are rolled up
//! to posts with a word-count-weighted mean.

mod assemble;
mod factor;
mod similarity;
mod tables;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{
    assemble_features, expand_selection, parse_selection, FeatureMatrix, FeatureSources, DISTORTION_COLUMNS,
    MENTAL_HEALTH_COLUMNS, MOTIVE_COLUMNS, PLT_SOURCES, S8D_SOURCE,
};
pub use factor::{composite_factor, CompositeFactor};
pub use similarity::{
    cosine_similarity, facet_score, load_embeddings, load_prototypes, score_resilience, write_embeddings,
    write_prototypes, EmbeddingTable, Facet, PrototypeSet, PROTOTYPES_PER_FACET, RESILIENCE_FACETS,
};
pub use tables::{aggregate_post, aggregate_to_posts, load_trait_table, parse_trait_table, write_trait_table, TraitTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Sentence,
    Post,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Sentence => "sentence",
            Granularity::Post => "post",
        }
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("no embedding for {} id(s): {}", .0.len(), .0.join(", "))]
    MissingEmbedding(Vec<String>),
    #[error("column {0} has zero variance")]
    DegenerateColumn(usize),
    #[error("{found} rows; at least {min} required")]
    TooFewRows { found: usize, min: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("malformed table {path} at row {row}, column {column}: {message}")]
    MalformedTable { path: String, row: usize, column: String, message: String },
    #[error("malformed {kind} file {path}: {message}")]
    MalformedFile { kind: &'static str, path: String, message: String },
    #[error("invalid prototype set: {0}")]
    InvalidPrototypes(String),
    #[error("{} id(s) not found in corpus: {}", .0.len(), .0.join(", "))]
    UnknownId(Vec<String>),
    #[error("source {source_name} lacks {} {} row(s): {}", .missing.len(), .granularity.as_str(), .missing.join(", "))]
    CoverageGap { source_name: String, granularity: Granularity, missing: Vec<String> },
    #[error("source {0} is only available at post level")]
    IllegalGranularity(String),
    #[error("unknown feature source {0:?}")]
    UnknownSource(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}
