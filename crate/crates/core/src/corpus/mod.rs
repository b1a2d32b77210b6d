//! Longitudinal corpus model and its JSON interchange format.
//!
//! Offsets everywhere in this module count Unicode scalar values, not bytes.

mod split;
pub mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use split::{split_sentences, word_count};

/// Default inclusive well-being score range.
pub const DEFAULT_SCORE_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("corpus invariant violated: {0}")]
    InvariantViolation(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

/// Adaptive or maladaptive self-state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfState {
    Adaptive,
    Maladaptive,
}

impl SelfState {
    pub const ALL: [SelfState; 2] = [SelfState::Adaptive, SelfState::Maladaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            SelfState::Adaptive => "adaptive",
            SelfState::Maladaptive => "maladaptive",
        }
    }
}

/// A character range inside one post, tagged with a self-state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub post_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub state: SelfState,
}

impl EvidenceSpan {
    pub fn len(&self) -> usize {
        self.char_end.saturating_sub(self.char_start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub sentence_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub word_count: usize,
    pub adaptive: Option<bool>,
    pub maladaptive: Option<bool>,
}

impl Sentence {
    pub fn label(&self, state: SelfState) -> Option<bool> {
        match state {
            SelfState::Adaptive => self.adaptive,
            SelfState::Maladaptive => self.maladaptive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub post_id: String,
    pub timestamp: i64,
    pub text: String,
    pub sentences: Vec<Sentence>,
    pub wellbeing: Option<f64>,
    pub gold_spans: Vec<EvidenceSpan>,
}

impl Post {
    /// Text length in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring between two scalar-value offsets. Out-of-range offsets are
    /// clamped to the text.
    pub fn slice(&self, char_start: usize, char_end: usize) -> &str {
        slice_chars(&self.text, char_start, char_end)
    }

    pub fn sentence_text(&self, sentence: &Sentence) -> &str {
        self.slice(sentence.char_start, sentence.char_end)
    }

    /// Build a post whose sentences come from [`split_sentences`], with ids
    /// `<post_id>.s<index>` and no labels.
    pub fn from_text(post_id: impl Into<String>, timestamp: i64, text: impl Into<String>) -> Self {
        let post_id = post_id.into();
        let text = text.into();
        let sentences = split_sentences(&text)
            .into_iter()
            .enumerate()
            .map(|(i, (s, e))| Sentence {
                sentence_id: format!("{post_id}.s{i}"),
                char_start: s,
                char_end: e,
                word_count: word_count(slice_chars(&text, s, e)),
                adaptive: None,
                maladaptive: None,
            })
            .collect();
        Post { post_id, timestamp, text, sentences, wellbeing: None, gold_spans: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub user_id: String,
    pub posts: Vec<Post>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub timelines: Vec<Timeline>,
}

impl Corpus {
    pub fn posts(&self) -> impl Iterator<Item = &Post> {
        self.timelines.iter().flat_map(|t| t.posts.iter())
    }

    /// Posts paired with their owning user id, in corpus order.
    pub fn posts_with_users(&self) -> impl Iterator<Item = (&str, &Post)> {
        self.timelines
            .iter()
            .flat_map(|t| t.posts.iter().map(move |p| (t.user_id.as_str(), p)))
    }

    /// Sentences with their user and post, in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = (&str, &Post, &Sentence)> {
        self.posts_with_users()
            .flat_map(|(u, p)| p.sentences.iter().map(move |s| (u, p, s)))
    }

    pub fn post(&self, post_id: &str) -> Option<&Post> {
        self.posts().find(|p| p.post_id == post_id)
    }

    pub fn n_posts(&self) -> usize {
        self.timelines.iter().map(|t| t.posts.len()).sum()
    }

    pub fn n_sentences(&self) -> usize {
        self.posts().map(|p| p.sentences.len()).sum()
    }

    /// Check every type invariant. `score_range` bounds well-being scores.
    pub fn validate(&self, score_range: (f64, f64)) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvariantViolation(m));
        let mut users = HashSet::new();
        let mut posts = HashSet::new();
        let mut sentences = HashSet::new();
        for t in &self.timelines {
            if !users.insert(t.user_id.as_str()) {
                return bad(format!("duplicate user_id {:?}", t.user_id));
            }
            for w in t.posts.windows(2) {
                if w[1].timestamp < w[0].timestamp {
                    return bad(format!(
                        "timeline {:?}: post {:?} precedes {:?} in time",
                        t.user_id, w[1].post_id, w[0].post_id
                    ));
                }
            }
            for p in &t.posts {
                if !posts.insert(p.post_id.as_str()) {
                    return bad(format!("duplicate post_id {:?}", p.post_id));
                }
                validate_post(p, score_range, &mut sentences)?;
            }
        }
        Ok(())
    }
}

fn validate_post<'a>(
    p: &'a Post,
    score_range: (f64, f64),
    sentence_ids: &mut HashSet<&'a str>,
) -> Result<(), CorpusError> {
    let bad = |m: String| Err(CorpusError::InvariantViolation(format!("post {:?}: {m}", p.post_id)));
    let len = p.char_len();
    if let Some(w) = p.wellbeing {
        if !w.is_finite() || w < score_range.0 || w > score_range.1 {
            return bad(format!("wellbeing {w} outside [{}, {}]", score_range.0, score_range.1));
        }
    }
    let mut prev_end = 0;
    for s in &p.sentences {
        if !sentence_ids.insert(s.sentence_id.as_str()) {
            return bad(format!("duplicate sentence_id {:?}", s.sentence_id));
        }
        if s.char_start >= s.char_end || s.char_end > len {
            return bad(format!(
                "sentence {:?} range [{}, {}) invalid for text of length {len}",
                s.sentence_id, s.char_start, s.char_end
            ));
        }
        if s.char_start < prev_end {
            return bad(format!("sentence {:?} overlaps or precedes its predecessor", s.sentence_id));
        }
        prev_end = s.char_end;
        let wc = word_count(p.sentence_text(s));
        if wc == 0 || wc != s.word_count {
            return bad(format!(
                "sentence {:?} word count {} does not match its text ({wc})",
                s.sentence_id, s.word_count
            ));
        }
    }
    for g in &p.gold_spans {
        if g.post_id != p.post_id {
            return bad(format!("gold span tagged with foreign post {:?}", g.post_id));
        }
        if g.char_start >= g.char_end || g.char_end > len {
            return bad(format!("gold span [{}, {}) invalid for text of length {len}", g.char_start, g.char_end));
        }
    }
    Ok(())
}

pub(crate) fn slice_chars(text: &str, char_start: usize, char_end: usize) -> &str {
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = it.by_ref().nth(char_start).unwrap_or(text.len());
    let end = if char_end > char_start {
        it.nth(char_end - char_start - 1).unwrap_or(text.len())
    } else {
        start
    };
    &text[start..end]
}

// Wire format. Field order here is the serialized key order.

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    timelines: Vec<TimelineFile>,
}

#[derive(Serialize, Deserialize)]
struct TimelineFile {
    user_id: String,
    posts: Vec<PostFile>,
}

#[derive(Serialize, Deserialize)]
struct PostFile {
    post_id: String,
    timestamp: i64,
    text: String,
    #[serde(default)]
    wellbeing: Option<f64>,
    #[serde(default)]
    sentences: Vec<SentenceFile>,
    #[serde(default)]
    gold_spans: Vec<SpanFile>,
}

#[derive(Serialize, Deserialize)]
struct SentenceFile {
    sentence_id: String,
    char_start: usize,
    char_end: usize,
    #[serde(default)]
    adaptive: Option<bool>,
    #[serde(default)]
    maladaptive: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct SpanFile {
    char_start: usize,
    char_end: usize,
    state: SelfState,
}

const TOP_KEYS: &[&str] = &["timelines"];
const TIMELINE_KEYS: &[&str] = &["user_id", "posts"];
const POST_KEYS: &[&str] = &["post_id", "timestamp", "text", "wellbeing", "sentences", "gold_spans"];
const SENTENCE_KEYS: &[&str] = &["sentence_id", "char_start", "char_end", "adaptive", "maladaptive"];
const SPAN_KEYS: &[&str] = &["char_start", "char_end", "state"];

fn unknown_keys(value: &Value) -> Vec<String> {
    fn check(v: &Value, known: &[&str], path: &str, out: &mut Vec<String>) {
        if let Value::Object(m) = v {
            for k in m.keys() {
                if !known.contains(&k.as_str()) {
                    out.push(format!("{path}.{k}"));
                }
            }
        }
    }
    fn each<'a>(v: &'a Value, key: &str) -> impl Iterator<Item = (usize, &'a Value)> {
        v.get(key).and_then(Value::as_array).into_iter().flatten().enumerate()
    }
    let mut out = Vec::new();
    check(value, TOP_KEYS, "$", &mut out);
    for (ti, t) in each(value, "timelines") {
        let tp = format!("$.timelines[{ti}]");
        check(t, TIMELINE_KEYS, &tp, &mut out);
        for (pi, p) in each(t, "posts") {
            let pp = format!("{tp}.posts[{pi}]");
            check(p, POST_KEYS, &pp, &mut out);
            for (si, s) in each(p, "sentences") {
                check(s, SENTENCE_KEYS, &format!("{pp}.sentences[{si}]"), &mut out);
            }
            for (gi, g) in each(p, "gold_spans") {
                check(g, SPAN_KEYS, &format!("{pp}.gold_spans[{gi}]"), &mut out);
            }
        }
    }
    out
}

/// Parse a corpus from JSON text. Returns the corpus and the JSON paths of
/// any unknown fields that were ignored.
pub fn parse_corpus(json: &str, score_range: (f64, f64)) -> Result<(Corpus, Vec<String>), CorpusError> {
    let value: Value = serde_json::from_str(json)
        .map_err(|e| CorpusError::Malformed { path: "$".into(), message: e.to_string() })?;
    let unknown = unknown_keys(&value);
    let file: CorpusFile = serde_path_to_error::deserialize(value).map_err(|e| CorpusError::Malformed {
        path: format!("$.{}", e.path()),
        message: e.inner().to_string(),
    })?;

    // Duplicate ids are schema-level errors rather than invariant violations.
    let mut seen = HashSet::new();
    for (ti, t) in file.timelines.iter().enumerate() {
        for (pi, p) in t.posts.iter().enumerate() {
            if !seen.insert(p.post_id.clone()) {
                return Err(CorpusError::Malformed {
                    path: format!("$.timelines[{ti}].posts[{pi}].post_id"),
                    message: format!("duplicate post_id {:?}", p.post_id),
                });
            }
        }
    }

    let mut timelines = Vec::with_capacity(file.timelines.len());
    for t in file.timelines {
        let mut posts = Vec::with_capacity(t.posts.len());
        for p in t.posts {
            let sentences = p
                .sentences
                .into_iter()
                .map(|s| {
                    let wc = word_count(slice_chars(&p.text, s.char_start, s.char_end.max(s.char_start)));
                    Sentence {
                        sentence_id: s.sentence_id,
                        char_start: s.char_start,
                        char_end: s.char_end,
                        word_count: wc,
                        adaptive: s.adaptive,
                        maladaptive: s.maladaptive,
                    }
                })
                .collect();
            let gold_spans = p
                .gold_spans
                .into_iter()
                .map(|g| EvidenceSpan {
                    post_id: p.post_id.clone(),
                    char_start: g.char_start,
                    char_end: g.char_end,
                    state: g.state,
                })
                .collect();
            posts.push(Post {
                post_id: p.post_id,
                timestamp: p.timestamp,
                text: p.text,
                sentences,
                wellbeing: p.wellbeing,
                gold_spans,
            });
        }
        timelines.push(Timeline { user_id: t.user_id, posts });
    }
    let corpus = Corpus { timelines };
    corpus.validate(score_range)?;
    Ok((corpus, unknown))
}

/// Serialize to the interchange JSON. Key order and float formatting are
/// deterministic; output ends with a newline.
pub fn corpus_to_json(corpus: &Corpus) -> String {
    let file = CorpusFile {
        timelines: corpus
            .timelines
            .iter()
            .map(|t| TimelineFile {
                user_id: t.user_id.clone(),
                posts: t
                    .posts
                    .iter()
                    .map(|p| PostFile {
                        post_id: p.post_id.clone(),
                        timestamp: p.timestamp,
                        text: p.text.clone(),
                        wellbeing: p.wellbeing,
                        sentences: p
                            .sentences
                            .iter()
                            .map(|s| SentenceFile {
                                sentence_id: s.sentence_id.clone(),
                                char_start: s.char_start,
                                char_end: s.char_end,
                                adaptive: s.adaptive,
                                maladaptive: s.maladaptive,
                            })
                            .collect(),
                        gold_spans: p
                            .gold_spans
                            .iter()
                            .map(|g| SpanFile { char_start: g.char_start, char_end: g.char_end, state: g.state })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("corpus serialization cannot fail");
    s.push('\n');
    s
}

/// Load and validate a corpus file using the default score range.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load_corpus_with_range(path, DEFAULT_SCORE_RANGE)
}

pub fn load_corpus_with_range(path: impl AsRef<Path>, score_range: (f64, f64)) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let (corpus, unknown) = parse_corpus(&text, score_range)?;
    let unique: BTreeSet<_> = unknown.iter().collect();
    for k in unique {
        log::warn!("{}: ignoring unknown field {k}", path.display());
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, corpus_to_json(corpus)).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}
