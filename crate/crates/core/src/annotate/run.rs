use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{cache_key, BackendError, LlmBackend, ResponseCache};
use super::parse::parse_response;
use super::prompt::{build_prompt, DimensionSpec, SpecSet};
use super::{AnnotateError, Dimension, DimensionScore, S8dScores, S8D_DIMENSIONS};
use crate::corpus::{Corpus, Post};
use crate::features::{FeatureError, Granularity, TraitTable};

/// Appended to the prompt when a previous completion could not be parsed.
pub const FORMAT_REMINDER: &str = "\n\nReply with a single JSON object with the keys \"rating\" (an integer from 1 \
to 9), \"reasoning\" and \"supporting spans\" (a list of exact phrases copied from the text).";

/// Backend plus the policies around it.
pub struct Annotator<'a> {
    pub backend: &'a dyn LlmBackend,
    pub cache: Option<&'a ResponseCache>,
    /// Extra attempts after an unparseable completion.
    pub retries: usize,
    /// Upper bound on concurrent backend requests.
    pub max_in_flight: usize,
}

impl<'a> Annotator<'a> {
    pub fn new(backend: &'a dyn LlmBackend) -> Self {
        Annotator { backend, cache: None, retries: 2, max_in_flight: 4 }
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

/// Rate one post on one dimension.
///
/// Only completions that parse are cached, so a retry always reaches the
/// backend. Backend errors are returned at once, except a replay miss, which
/// moves on to the next attempt. Parse errors trigger up to `retries` further
/// attempts with [`FORMAT_REMINDER`] appended.
pub fn annotate_post(annotator: &Annotator, spec: &DimensionSpec, post: &Post) -> Result<DimensionScore, AnnotateError> {
    let base = build_prompt(spec, &post.text)?;
    let identity = annotator.backend.identity();
    let mut last = None;
    for attempt in 0..=annotator.retries {
        let prompt = if attempt == 0 { base.clone() } else { format!("{base}{FORMAT_REMINDER}") };
        let key = cache_key(&identity, &prompt);
        let cached = annotator.cache.and_then(|c| c.get(&key));
        let fresh = cached.is_none();
        let raw = match cached {
            Some(r) => r,
            None => match annotator.backend.send(&prompt) {
                Ok(r) => r,
                // a replayed run may have succeeded only on a retry prompt
                Err(BackendError::NotRecorded(_)) if attempt < annotator.retries => continue,
                Err(e) => return Err(e.into()),
            },
        };
        match parse_response(&raw, &post.text, spec.dimension) {
            Ok(score) => {
                if let (true, Some(cache)) = (fresh, annotator.cache) {
                    if let Err(e) = cache.insert(&key, &raw) {
                        log::warn!("could not append to response cache: {e}");
                    }
                }
                return Ok(score);
            }
            Err(e) => {
                log::debug!("{} {}: attempt {} unparseable: {e}", post.post_id, spec.dimension, attempt + 1);
                last = Some(e);
            }
        }
    }
    Err(AnnotateError::ExhaustedRetries {
        attempts: annotator.retries + 1,
        last: last.expect("at least one attempt ran"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostFailure {
    pub post_id: String,
    pub dimension: Option<Dimension>,
    pub message: String,
}

/// Ratings for every post that completed, in corpus order, plus the failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationReport {
    pub scores: Vec<S8dScores>,
    pub failures: Vec<PostFailure>,
}

fn annotate_all_dimensions(annotator: &Annotator, specs: &SpecSet, post: &Post) -> Result<S8dScores, PostFailure> {
    let mut scores = Vec::with_capacity(Dimension::ALL.len());
    for d in Dimension::ALL {
        match annotate_post(annotator, specs.get(d), post) {
            Ok(s) => scores.push(s),
            Err(e) => {
                return Err(PostFailure { post_id: post.post_id.clone(), dimension: Some(d), message: e.to_string() })
            }
        }
    }
    Ok(S8dScores { post_id: post.post_id.clone(), scores })
}

/// Rate every post on all eight dimensions with at most `max_in_flight`
/// requests outstanding. A post is kept only if all eight ratings succeed.
pub fn annotate_corpus(annotator: &Annotator, specs: &SpecSet, corpus: &Corpus) -> AnnotationReport {
    let posts: Vec<&Post> = corpus.posts().collect();
    let slots: Vec<Mutex<Option<Result<S8dScores, PostFailure>>>> = posts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = annotator.max_in_flight.max(1).min(posts.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(post) = posts.get(i) else { break };
                let result = annotate_all_dimensions(annotator, specs, post);
                *slots[i].lock().expect("result slot") = Some(result);
            });
        }
    });
    let mut report = AnnotationReport { scores: Vec::new(), failures: Vec::new() };
    for slot in slots {
        match slot.into_inner().expect("result slot").expect("every post processed") {
            Ok(s) => report.scores.push(s),
            Err(f) => {
                log::warn!("annotation failed for {}: {}", f.post_id, f.message);
                report.failures.push(f);
            }
        }
    }
    report
}

/// Post-level table with one integer-valued column per dimension.
pub fn scores_to_table(scores: &[S8dScores]) -> Result<TraitTable, FeatureError> {
    let rows = scores
        .iter()
        .map(|s| (s.post_id.clone(), Dimension::ALL.iter().map(|d| s.rating(*d).map_or(f64::NAN, f64::from)).collect()))
        .collect();
    TraitTable::new(Granularity::Post, S8D_DIMENSIONS.iter().map(|d| d.to_string()).collect(), rows)
}
