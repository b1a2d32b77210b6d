//! Language-based well-being and self-state assessment.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: longitudinal timelines of posts, sentence splitting, the
//!   corpus interchange format and a planted-signal synthetic generator.
//! - [`annotate`]: per-dimension Situational 8 DIAMONDS prompting against a
//!   pluggable LLM backend with parsing, retries and a response cache.
//! - [`features`]: trait tables, prototype-similarity resilience facets, the
//!   one-factor composite and named feature matrices.
//! - [`learner`]: standardization, closed-form ridge and L2 logistic regression.
//! - [`eval`]: nested cross-validation, metrics, evidence-span extraction and
//!   span/timeline scoring.
//! - [`insight`]: correlations, betas, histograms and CSV/SVG report emission.

pub mod annotate;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod insight;
pub mod learner;

pub use corpus::{Corpus, EvidenceSpan, Post, Sentence, SelfState, Timeline};
pub use features::{FeatureMatrix, Granularity, TraitTable};
pub use learner::{FittedLinearModel, ModelKind};
