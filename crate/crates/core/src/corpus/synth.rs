//! Seeded synthetic corpora with planted well-being and self-state signal.
//!
//! Sentence-level trait scores and embeddings are drawn first. The post-level
//! features are then derived with the same code the pipeline uses (prototype
//! similarity for resilience, word-count-weighted aggregation), and the
//! planted linear model is applied to those derived values, so a correct
//! pipeline sees exactly the signal that was planted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{save_corpus, Corpus, CorpusError, EvidenceSpan, Post, SelfState, Timeline, DEFAULT_SCORE_RANGE};
use crate::annotate::S8D_DIMENSIONS;
use crate::features::{
    aggregate_to_posts, score_resilience, write_embeddings, write_prototypes, write_trait_table, EmbeddingTable,
    Facet, FeatureError, FeatureMatrix, Granularity, PrototypeSet, TraitTable, DISTORTION_COLUMNS,
    MENTAL_HEALTH_COLUMNS, MOTIVE_COLUMNS, PROTOTYPES_PER_FACET, RESILIENCE_FACETS, S8D_SOURCE,
};
use crate::learner::sigmoid;

const VOCABULARY: [&str; 64] = [
    "today", "morning", "work", "friend", "family", "walk", "sleep", "tired", "hope", "worry", "calm", "call",
    "therapy", "music", "rain", "sun", "kitchen", "coffee", "class", "exam", "bus", "late", "early", "quiet",
    "loud", "room", "phone", "message", "sister", "brother", "mother", "father", "dog", "cat", "park", "book",
    "write", "read", "cook", "clean", "run", "felt", "think", "maybe", "again", "still", "never", "always",
    "small", "big", "good", "bad", "better", "worse", "night", "week", "plan", "help", "alone", "together",
    "laugh", "cry", "breathe", "rest",
];

/// Trait sources drawn at sentence level, with their columns.
const SENTENCE_SOURCES: [(&str, &[&str]); 3] = [
    ("motives", &MOTIVE_COLUMNS),
    ("mental_health", &MENTAL_HEALTH_COLUMNS),
    ("distortion", &DISTORTION_COLUMNS),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub posts_per_user: usize,
    /// Inclusive range of sentences per post.
    pub sentences_per_post: (usize, usize),
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    /// Standard deviation of the Gaussian noise added to well-being.
    pub noise_sd: f64,
    /// When set, replaces `noise_sd` so that signal variance / noise variance
    /// equals this value.
    pub snr: Option<f64>,
    /// When set, the planted coefficients are rescaled so the noise-free
    /// score has this standard deviation over posts.
    pub signal_sd: Option<f64>,
    /// Mean of the noise-free score; defaults to the middle of `score_range`.
    pub wellbeing_center: Option<f64>,
    /// Planted well-being coefficients per standardized post feature,
    /// keyed `source.column`.
    pub wellbeing_coefficients: BTreeMap<String, f64>,
    pub adaptive_intercept: f64,
    /// Logistic coefficients per standardized sentence feature.
    pub adaptive_coefficients: BTreeMap<String, f64>,
    pub maladaptive_intercept: f64,
    pub maladaptive_coefficients: BTreeMap<String, f64>,
    pub user_sd: f64,
    pub post_sd: f64,
    pub sentence_sd: f64,
    pub embedding_dim: usize,
    pub score_range: (f64, f64),
}

fn coefs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 8,
            posts_per_user: 5,
            sentences_per_post: (2, 6),
            words_per_sentence: (3, 12),
            noise_sd: 0.5,
            snr: None,
            signal_sd: Some(1.5),
            wellbeing_center: None,
            wellbeing_coefficients: coefs(&[
                ("mental_health.valence", 0.5),
                ("mental_health.satisfaction_with_life", 0.4),
                ("mental_health.harmony_in_life", 0.2),
                ("mental_health.anxiety", -0.4),
                ("mental_health.depression_phq9", -0.5),
                ("mental_health.depression_cesd", -0.2),
                ("distortion.cognitive_distortion", -0.4),
                ("motives.affiliation", 0.2),
                ("resilience.optimism", 0.3),
                ("resilience.sense_of_social_support", 0.2),
                ("resilience.coping_toolkit", 0.2),
            ]),
            adaptive_intercept: -1.0,
            adaptive_coefficients: coefs(&[
                ("mental_health.valence", 1.2),
                ("resilience.optimism", 0.6),
                ("resilience.coping_toolkit", 0.4),
                ("distortion.cognitive_distortion", -0.5),
            ]),
            maladaptive_intercept: -1.2,
            maladaptive_coefficients: coefs(&[
                ("mental_health.anxiety", 1.0),
                ("mental_health.depression_phq9", 0.8),
                ("distortion.cognitive_distortion", 0.8),
                ("mental_health.valence", -0.5),
            ]),
            user_sd: 0.8,
            post_sd: 0.5,
            sentence_sd: 1.0,
            embedding_dim: 16,
            score_range: DEFAULT_SCORE_RANGE,
        }
    }
}

impl SynthConfig {
    /// 30 users with 11 posts each and signal-to-noise variance ratio 3.
    pub fn full_scale() -> Self {
        SynthConfig { n_users: 30, posts_per_user: 11, snr: Some(3.0), ..SynthConfig::default() }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if self.n_users == 0 || self.posts_per_user == 0 {
            return bad("n_users and posts_per_user must be positive");
        }
        let (s0, s1) = self.sentences_per_post;
        let (w0, w1) = self.words_per_sentence;
        if s0 == 0 || s0 > s1 || w0 == 0 || w0 > w1 {
            return bad("sentence and word ranges must be non-empty and start at 1 or more");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        if self.snr.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("snr must be positive");
        }
        if self.signal_sd.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("signal_sd must be positive");
        }
        for sd in [self.user_sd, self.post_sd, self.sentence_sd] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return bad("trait standard deviations must be finite and non-negative");
            }
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be at least 2");
        }
        let (lo, hi) = self.score_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return bad("score_range must be an increasing finite pair");
        }
        let all_coefs = self
            .wellbeing_coefficients
            .values()
            .chain(self.adaptive_coefficients.values())
            .chain(self.maladaptive_coefficients.values());
        if all_coefs.chain([&self.adaptive_intercept, &self.maladaptive_intercept]).any(|v| !v.is_finite()) {
            return bad("coefficients must be finite");
        }
        let post_cols = post_columns();
        if let Some(k) = self.wellbeing_coefficients.keys().find(|k| !post_cols.contains(k)) {
            return Err(CorpusError::InvalidConfig(format!("unknown well-being feature {k:?}")));
        }
        let sentence_cols = sentence_columns();
        for k in self.adaptive_coefficients.keys().chain(self.maladaptive_coefficients.keys()) {
            if !sentence_cols.contains(k) {
                return Err(CorpusError::InvalidConfig(format!("unknown sentence feature {k:?}")));
            }
        }
        Ok(())
    }
}

fn sentence_columns() -> Vec<String> {
    let mut cols: Vec<String> = SENTENCE_SOURCES
        .iter()
        .flat_map(|(src, cols)| cols.iter().map(move |c| format!("{src}.{c}")))
        .collect();
    cols.extend(RESILIENCE_FACETS.iter().map(|f| format!("resilience.{f}")));
    cols
}

fn post_columns() -> Vec<String> {
    let mut cols = sentence_columns();
    cols.extend(S8D_DIMENSIONS.iter().map(|d| format!("{S8D_SOURCE}.{d}")));
    cols
}

/// A planted logistic model on raw sentence features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLabels {
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub positives: usize,
}

/// Ground truth behind a synthetic corpus, in raw feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub seed: u64,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub signal_sd: f64,
    pub noise_sd: f64,
    /// Posts whose score was clipped into the score range.
    pub n_clipped: usize,
    pub adaptive: PlantedLabels,
    pub maladaptive: PlantedLabels,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    /// Sentence-level trait tables keyed by source name.
    pub sentence_traits: Vec<(String, TraitTable)>,
    /// Post-level S8D ratings.
    pub s8d: TraitTable,
    /// Sentence embeddings.
    pub embeddings: EmbeddingTable,
    pub prototypes: PrototypeSet,
    /// Every post-level feature the planted model can use, in corpus order.
    pub post_features: FeatureMatrix,
    pub planted: Planted,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn sentence_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut s = String::new();
    for i in 0..words {
        let w = VOCABULARY[rng.random_range(0..VOCABULARY.len())];
        if i == 0 {
            let mut chars = w.chars();
            let first = chars.next().expect("vocabulary words are non-empty");
            s.extend(first.to_uppercase());
            s.push_str(chars.as_str());
        } else {
            s.push(' ');
            s.push_str(w);
        }
    }
    s.push(match rng.random_range(0..10) {
        0 => '!',
        1 => '?',
        _ => '.',
    });
    s
}

/// Column means and population standard deviations.
fn moments(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    let means: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
    let sds = m
        .column_iter()
        .zip(&means)
        .map(|(c, mu)| (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (means, sds)
}

/// Raw intercept offset, raw coefficients, linear predictor before the intercept.
type RawModel = (f64, BTreeMap<String, f64>, Vec<f64>);

/// Convert standardized coefficients into raw ones.
fn unstandardize(
    names: &[String],
    values: &DMatrix<f64>,
    standardized: &BTreeMap<String, f64>,
    scale_to: Option<f64>,
) -> Result<RawModel, CorpusError> {
    let (means, sds) = moments(values);
    let mut raw = BTreeMap::new();
    for (name, beta) in standardized {
        if *beta == 0.0 {
            continue;
        }
        let j = names.iter().position(|n| n == name).expect("validated column");
        if sds[j] < 1e-12 {
            return Err(CorpusError::InvalidConfig(format!("feature {name} is constant; cannot plant on it")));
        }
        raw.insert(name.clone(), (j, beta / sds[j]));
    }
    let predictor = |raw: &BTreeMap<String, (usize, f64)>| -> Vec<f64> {
        (0..values.nrows()).map(|i| raw.values().map(|(j, c)| c * (values[(i, *j)] - means[*j])).sum()).collect()
    };
    if let Some(target) = scale_to {
        let lin = predictor(&raw);
        let n = lin.len() as f64;
        let sd = (lin.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if sd > 1e-12 {
            for (_, c) in raw.values_mut() {
                *c *= target / sd;
            }
        }
    }
    let offset = -raw.values().map(|(j, c)| c * means[*j]).sum::<f64>();
    let lin: Vec<f64> = (0..values.nrows()).map(|i| raw.values().map(|(j, c)| c * values[(i, *j)]).sum()).collect();
    Ok((offset, raw.into_iter().map(|(k, (_, c))| (k, c)).collect(), lin))
}

fn table_err(e: FeatureError) -> CorpusError {
    match e {
        FeatureError::Io { path, source } => CorpusError::Io { path, source },
        other => CorpusError::InvariantViolation(other.to_string()),
    }
}

fn merge_runs(post: &Post, state: SelfState) -> Vec<EvidenceSpan> {
    let mut spans: Vec<EvidenceSpan> = Vec::new();
    let mut open = false;
    for s in &post.sentences {
        if s.label(state) == Some(true) {
            match spans.last_mut() {
                Some(last) if open => last.char_end = s.char_end,
                _ => spans.push(EvidenceSpan {
                    post_id: post.post_id.clone(),
                    char_start: s.char_start,
                    char_end: s.char_end,
                    state,
                }),
            }
            open = true;
        } else {
            open = false;
        }
    }
    spans
}

/// Generate a corpus and its feature inputs. Pure in `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SynthData, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = config.embedding_dim;

    // Embedding geometry: a shared direction plus one center per facet.
    let base = unit_vector(&mut rng, dim);
    let centers: Vec<Vec<f64>> = (0..RESILIENCE_FACETS.len()).map(|_| unit_vector(&mut rng, dim)).collect();
    let facets: Vec<Facet> = RESILIENCE_FACETS
        .iter()
        .zip(&centers)
        .map(|(name, c)| Facet {
            name: name.to_string(),
            prototypes: (0..PROTOTYPES_PER_FACET)
                .map(|_| c.iter().map(|v| v + 0.3 * normal(&mut rng) / (dim as f64).sqrt()).collect())
                .collect(),
        })
        .collect();
    let prototypes = PrototypeSet::new(facets).map_err(table_err)?;

    let n_trait_cols: usize = SENTENCE_SOURCES.iter().map(|(_, c)| c.len()).sum();
    let n_latent = n_trait_cols + RESILIENCE_FACETS.len();
    let mut timelines = Vec::with_capacity(config.n_users);
    let mut sentence_rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut embeddings = EmbeddingTable::new(dim);
    let mut s8d_rows = Vec::new();

    for u in 0..config.n_users {
        let user_id = format!("u{u:03}");
        let user_means: Vec<f64> = (0..n_latent).map(|_| config.user_sd * normal(&mut rng)).collect();
        let user_s8d: Vec<f64> = (0..S8D_DIMENSIONS.len()).map(|_| 5.0 + normal(&mut rng)).collect();
        let start = 1_600_000_000 + u as i64 * 3_600;
        let mut posts = Vec::with_capacity(config.posts_per_user);
        for p in 0..config.posts_per_user {
            let post_id = format!("{user_id}.p{p:03}");
            let post_offsets: Vec<f64> = (0..n_latent).map(|_| config.post_sd * normal(&mut rng)).collect();
            let n_sent = rng.random_range(config.sentences_per_post.0..=config.sentences_per_post.1);
            let texts: Vec<String> = (0..n_sent)
                .map(|_| {
                    let w = rng.random_range(config.words_per_sentence.0..=config.words_per_sentence.1);
                    sentence_text(&mut rng, w)
                })
                .collect();
            let post = Post::from_text(post_id.clone(), start + p as i64 * 86_400, texts.join(" "));
            assert_eq!(post.sentences.len(), n_sent, "generated text must split into its own sentences");
            for s in &post.sentences {
                let latent: Vec<f64> = (0..n_latent)
                    .map(|j| user_means[j] + post_offsets[j] + config.sentence_sd * normal(&mut rng))
                    .collect();
                let mut vector = base.clone();
                for (f, c) in centers.iter().enumerate() {
                    let a = 0.6 * latent[n_trait_cols + f];
                    vector.iter_mut().zip(c).for_each(|(v, cv)| *v += a * cv);
                }
                vector.iter_mut().for_each(|v| *v += 0.4 * normal(&mut rng) / (dim as f64).sqrt());
                embeddings.insert(s.sentence_id.clone(), vector).map_err(table_err)?;
                sentence_rows.push((s.sentence_id.clone(), latent[..n_trait_cols].to_vec()));
            }
            let ratings: Vec<f64> =
                user_s8d.iter().map(|m| (m + 1.5 * normal(&mut rng)).round().clamp(1.0, 9.0)).collect();
            s8d_rows.push((post_id, ratings));
            posts.push(post);
        }
        timelines.push(Timeline { user_id, posts });
    }
    let mut corpus = Corpus { timelines };

    // Split the drawn sentence traits into their source tables.
    let mut sentence_traits = Vec::new();
    let mut offset = 0;
    for (src, cols) in SENTENCE_SOURCES {
        let rows = sentence_rows.iter().map(|(id, v)| (id.clone(), v[offset..offset + cols.len()].to_vec())).collect();
        let table = TraitTable::new(Granularity::Sentence, cols.iter().map(|c| c.to_string()).collect(), rows)
            .map_err(table_err)?;
        sentence_traits.push((src.to_string(), table));
        offset += cols.len();
    }
    let sentence_ids: Vec<String> = corpus.sentences().map(|(_, _, s)| s.sentence_id.clone()).collect();
    let resilience =
        score_resilience(&embeddings, &prototypes, &sentence_ids, Granularity::Sentence).map_err(table_err)?;
    let s8d = TraitTable::new(Granularity::Post, S8D_DIMENSIONS.iter().map(|d| d.to_string()).collect(), s8d_rows)
        .map_err(table_err)?;

    let sentence_matrix = {
        let tables: Vec<(&str, &TraitTable)> = sentence_traits
            .iter()
            .map(|(n, t)| (n.as_str(), t))
            .chain([("resilience", &resilience)])
            .collect();
        stack(&tables, &sentence_ids)
    };
    let post_ids: Vec<String> = corpus.posts().map(|p| p.post_id.clone()).collect();
    let mut post_tables = Vec::new();
    for (name, table) in sentence_traits.iter().map(|(n, t)| (n.as_str(), t)).chain([("resilience", &resilience)]) {
        post_tables.push((name, aggregate_to_posts(table, &corpus).map_err(table_err)?));
    }
    let post_matrix = {
        let mut tables: Vec<(&str, &TraitTable)> = post_tables.iter().map(|(n, t)| (*n, t)).collect();
        tables.push((S8D_SOURCE, &s8d));
        stack(&tables, &post_ids)
    };

    // Self-state labels from logistic models of sentence features.
    let mut label_models = Vec::new();
    for (state, intercept, coefs) in [
        (SelfState::Adaptive, config.adaptive_intercept, &config.adaptive_coefficients),
        (SelfState::Maladaptive, config.maladaptive_intercept, &config.maladaptive_coefficients),
    ] {
        let (off, raw, lin) = unstandardize(&sentence_matrix.column_names, &sentence_matrix.values, coefs, None)?;
        let draws: Vec<bool> = lin.iter().map(|l| rng.random::<f64>() < sigmoid(intercept + off + l)).collect();
        let positives = draws.iter().filter(|d| **d).count();
        label_models.push((state, PlantedLabels { intercept: intercept + off, coefficients: raw, positives }, draws));
    }
    let mut k = 0;
    for post in corpus.timelines.iter_mut().flat_map(|t| t.posts.iter_mut()) {
        for s in post.sentences.iter_mut() {
            s.adaptive = Some(label_models[0].2[k]);
            s.maladaptive = Some(label_models[1].2[k]);
            k += 1;
        }
        post.gold_spans = SelfState::ALL.iter().flat_map(|st| merge_runs(post, *st)).collect();
    }

    // Well-being from the planted post-level model.
    let (lo, hi) = config.score_range;
    let center = config.wellbeing_center.unwrap_or((lo + hi) / 2.0);
    let (off, raw, lin) = unstandardize(
        &post_matrix.column_names,
        &post_matrix.values,
        &config.wellbeing_coefficients,
        config.signal_sd,
    )?;
    let intercept = center + off;
    let mean_lin = lin.iter().sum::<f64>() / lin.len() as f64;
    let signal_sd = (lin.iter().map(|v| (v - mean_lin).powi(2)).sum::<f64>() / lin.len() as f64).sqrt();
    let noise_sd = match config.snr {
        Some(snr) => signal_sd / snr.sqrt(),
        None => config.noise_sd,
    };
    let mut n_clipped = 0;
    for (post, l) in corpus.timelines.iter_mut().flat_map(|t| t.posts.iter_mut()).zip(&lin) {
        let noise = if noise_sd > 0.0 { noise_sd * normal(&mut rng) } else { 0.0 };
        let score = intercept + l + noise;
        let clipped = score.clamp(lo, hi);
        if clipped != score {
            n_clipped += 1;
        }
        post.wellbeing = Some(clipped);
    }
    corpus.validate(config.score_range)?;

    let mut labels = label_models.into_iter().map(|(_, m, _)| m);
    let planted = Planted {
        seed,
        intercept,
        coefficients: raw,
        signal_sd,
        noise_sd,
        n_clipped,
        adaptive: labels.next().expect("two label models"),
        maladaptive: labels.next().expect("two label models"),
    };
    Ok(SynthData { corpus, sentence_traits, s8d, embeddings, prototypes, post_features: post_matrix, planted })
}

fn stack(tables: &[(&str, &TraitTable)], ids: &[String]) -> FeatureMatrix {
    let column_names: Vec<String> =
        tables.iter().flat_map(|(n, t)| t.columns().iter().map(move |c| format!("{n}.{c}"))).collect();
    let mut values = DMatrix::zeros(ids.len(), column_names.len());
    for (i, id) in ids.iter().enumerate() {
        let mut j = 0;
        for (_, t) in tables {
            for v in t.get(id).expect("tables built over the same ids") {
                values[(i, j)] = *v;
                j += 1;
            }
        }
    }
    FeatureMatrix { row_ids: ids.to_vec(), column_names, values }
}

/// File names written by [`SynthData::write_to_dir`].
pub const CORPUS_FILE: &str = "corpus.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
pub const PROTOTYPES_FILE: &str = "prototypes.json";
pub const PLANTED_FILE: &str = "planted.json";

/// Trait table file name for a source at a granularity, e.g. `motives.sentence.csv`.
pub fn trait_file_name(source: &str, granularity: Granularity) -> String {
    format!("{source}.{}.csv", granularity.as_str())
}

impl SynthData {
    /// Write every artifact into `dir` (created if needed) and return the paths.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CorpusError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| CorpusError::Io { path: dir.into(), source })?;
        let mut written = Vec::new();
        let corpus_path = dir.join(CORPUS_FILE);
        save_corpus(&self.corpus, &corpus_path)?;
        written.push(corpus_path);
        let emb = dir.join(EMBEDDINGS_FILE);
        write_embeddings(&self.embeddings, &emb).map_err(table_err)?;
        written.push(emb);
        let protos = dir.join(PROTOTYPES_FILE);
        write_prototypes(&self.prototypes, &protos).map_err(table_err)?;
        written.push(protos);
        for (name, table) in self.sentence_traits.iter().map(|(n, t)| (n.as_str(), t)).chain([(S8D_SOURCE, &self.s8d)]) {
            let path = dir.join(trait_file_name(name, table.granularity()));
            write_trait_table(table, &path).map_err(table_err)?;
            written.push(path);
        }
        let planted = dir.join(PLANTED_FILE);
        let mut json = serde_json::to_string_pretty(&self.planted).expect("planted model serializes");
        json.push('\n');
        fs::write(&planted, json).map_err(|source| CorpusError::Io { path: planted.clone(), source })?;
        written.push(planted);
        Ok(written)
    }
}
