//! Subcommand implementations, usable as a library so callers can inject an
//! LLM backend or inspect results directly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use wellstate_core::annotate::{
    annotate_corpus, scores_to_table, AnnotationReport, Annotator, HttpBackend, LlmBackend, MockBackend, ReplayBackend,
    ResponseCache, SpecSet,
};
use wellstate_core::corpus::synth::{generate_synthetic, trait_file_name};
use wellstate_core::corpus::{load_corpus_with_range, Corpus, EvidenceSpan, SelfState};
use wellstate_core::eval::{
    extract_evidence, make_folds, nested_cv, span_recall, timeline_mse, CvResult, SpanRecall, Task, TimelineMse,
    DEFAULT_OVERLAP_MIN,
};
use wellstate_core::features::{
    aggregate_to_posts, assemble_features, composite_factor, expand_selection, load_embeddings, load_prototypes,
    load_trait_table, parse_selection, score_resilience, write_trait_table, FeatureSources, Granularity, TraitTable,
    S8D_SOURCE,
};
use wellstate_core::insight::{
    emit_report, feature_correlations, model_betas, probability_histogram, Histogram, InsightReport,
};
use wellstate_core::learner::fit_ridge;

use crate::config::{BackendKind, RunConfig, TaskKind};
use crate::manifest::write_manifest;
use crate::CliError;

/// Feature source holding the one-factor summary of the resilience facets.
pub const RESILIENCE_COMPOSITE: &str = "resilience_composite";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("i/o failure on {}: {e}", path.display()))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(dir: &Path, name: &str, content: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    Ok(name.to_string())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    write_text(dir, name, &json)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    Ok(load_corpus_with_range(cfg.corpus_path()?, cfg.score_range)?)
}

// ---------------------------------------------------------------- synth

/// Generate a synthetic data directory at `cfg.out`. Returns the written
/// files, manifest included.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let synth = cfg.synth.resolve();
    let data = generate_synthetic(&synth, cfg.seed)?;
    let mut files = data.write_to_dir(&cfg.out)?;
    let names: Vec<String> =
        files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let mut recorded = cfg.clone();
    recorded.synth.config = Some(synth);
    files.push(write_manifest(&cfg.out, "synth", &recorded, &[], &names)?);
    log::info!(
        "synthetic corpus: {} users, {} posts, {} sentences",
        data.corpus.timelines.len(),
        data.corpus.n_posts(),
        data.corpus.n_sentences()
    );
    Ok(files)
}

// ---------------------------------------------------------------- annotate

/// Annotate with the backend named in the configuration.
pub fn cmd_annotate(cfg: &RunConfig) -> Result<AnnotationReport, CliError> {
    let settings = &cfg.backend;
    match settings.kind {
        BackendKind::Mock => annotate_with_backend(cfg, &MockBackend::new()),
        BackendKind::Http => {
            let backend = HttpBackend::new(settings.http.clone());
            backend.require_token().map_err(|e| CliError::Backend(e.to_string()))?;
            annotate_with_backend(cfg, &backend)
        }
        BackendKind::Cache => {
            let path = settings
                .cache_file
                .as_ref()
                .ok_or_else(|| CliError::Config("backend kind `cache` needs `cache_file`".into()))?;
            let identity = settings
                .identity
                .clone()
                .unwrap_or_else(|| HttpBackend::new(settings.http.clone()).identity());
            let replay = ReplayBackend::from_file(identity, path).map_err(|e| io_err(path, e))?;
            let mut no_cache = cfg.clone();
            no_cache.backend.cache_file = None;
            annotate_inner(cfg, &no_cache, &replay)
        }
    }
}

/// Annotate every post of the configured corpus with `backend`, using the
/// configured response cache, and write `s8d.post.csv`, `annotations.json`,
/// `annotation_errors.json` and a manifest. Fails with a backend error when
/// no post could be annotated.
pub fn annotate_with_backend(cfg: &RunConfig, backend: &dyn LlmBackend) -> Result<AnnotationReport, CliError> {
    annotate_inner(cfg, cfg, backend)
}

fn annotate_inner(recorded: &RunConfig, cfg: &RunConfig, backend: &dyn LlmBackend) -> Result<AnnotationReport, CliError> {
    let corpus = load_corpus(cfg)?;
    let specs = match &cfg.backend.specs {
        Some(p) => SpecSet::load(p)?,
        None => SpecSet::builtin(),
    };
    let cache = match &cfg.backend.cache_file {
        Some(p) => Some(ResponseCache::open(p).map_err(|e| io_err(p, e))?),
        None => None,
    };
    let mut annotator =
        Annotator::new(backend).with_retries(cfg.backend.retries).with_max_in_flight(cfg.backend.max_in_flight);
    if let Some(c) = &cache {
        annotator = annotator.with_cache(c);
    }
    let report = annotate_corpus(&annotator, &specs, &corpus);

    create_out(&cfg.out)?;
    let mut outputs = Vec::new();
    let table = scores_to_table(&report.scores)?;
    let table_name = trait_file_name(S8D_SOURCE, Granularity::Post);
    write_trait_table(&table, cfg.out.join(&table_name))?;
    outputs.push(table_name);
    outputs.push(write_json(&cfg.out, "annotations.json", &report.scores)?);
    outputs.push(write_json(&cfg.out, "annotation_errors.json", &report.failures)?);
    let mut inputs = vec![cfg.corpus_path()?.to_path_buf()];
    inputs.extend(cfg.backend.specs.clone());
    write_manifest(&cfg.out, "annotate", recorded, &inputs, &outputs)?;

    if report.scores.is_empty() && !report.failures.is_empty() {
        return Err(CliError::Backend(format!(
            "all {} post(s) failed; first failure: {}",
            report.failures.len(),
            report.failures[0].message
        )));
    }
    Ok(report)
}

// ---------------------------------------------------------------- run

/// Result of `run`, returned for programmatic inspection.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub cv: CvResult,
    pub column_names: Vec<String>,
    pub n_columns: usize,
    pub n_rows: usize,
    pub timeline: Option<TimelineMse>,
    pub span_recall: Option<SpanRecall>,
    pub predicted_spans: Vec<EvidenceSpan>,
    pub report: InsightReport,
    /// Written files relative to `out`.
    pub files: Vec<String>,
}

fn task_state(task: TaskKind) -> Option<SelfState> {
    match task {
        TaskKind::Wellbeing => None,
        TaskKind::Adaptive => Some(SelfState::Adaptive),
        TaskKind::Maladaptive => Some(SelfState::Maladaptive),
    }
}

fn load_sources(cfg: &RunConfig, corpus: &Corpus, selection: &[String]) -> Result<FeatureSources, CliError> {
    let mut sources = FeatureSources::new();
    for spec in &cfg.sources {
        let table = load_trait_table(&spec.path, spec.granularity)?;
        table.check_ids(corpus)?;
        sources.insert(spec.name.clone(), table);
    }
    let wants_resilience = selection.iter().any(|s| s == "resilience" || s == RESILIENCE_COMPOSITE);
    let have_resilience = cfg.sources.iter().any(|s| s.name == "resilience");
    if wants_resilience && !have_resilience {
        let (Some(emb), Some(protos)) = (&cfg.embeddings, &cfg.prototypes) else {
            return Err(CliError::Config(
                "resilience features need `embeddings` and `prototypes` (or a `resilience` source table)".into(),
            ));
        };
        let embeddings = load_embeddings(emb)?;
        let prototypes = load_prototypes(protos)?;
        let ids: Vec<String> = corpus.sentences().map(|(_, _, s)| s.sentence_id.clone()).collect();
        sources.insert("resilience", score_resilience(&embeddings, &prototypes, &ids, Granularity::Sentence)?);
    }
    Ok(sources)
}

fn add_composite(
    sources: &mut FeatureSources,
    corpus: &Corpus,
    granularity: Granularity,
) -> Result<(), CliError> {
    let facets = match (sources.get("resilience", granularity), granularity) {
        (Some(t), _) => t.clone(),
        (None, Granularity::Post) => match sources.get("resilience", Granularity::Sentence) {
            Some(t) => aggregate_to_posts(t, corpus)?,
            None => return Err(CliError::Config("no resilience table for the composite".into())),
        },
        (None, Granularity::Sentence) => {
            return Err(CliError::Config("no sentence-level resilience table for the composite".into()))
        }
    };
    let ids: Vec<String> = facets.ids().to_vec();
    let ncols = facets.columns().len();
    let mut m = DMatrix::zeros(ids.len(), ncols);
    for (i, (_, row)) in facets.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let factor = composite_factor(&m)?;
    log::info!("resilience composite explains {:.3} of facet variance", factor.variance_explained);
    let rows = ids.into_iter().zip(factor.scores.iter().map(|s| vec![*s])).collect();
    sources.insert(RESILIENCE_COMPOSITE, TraitTable::new(granularity, vec!["composite".into()], rows)?);
    Ok(())
}

/// Assemble features for the configured task, run nested cross-validation and
/// write predictions, metrics, evidence spans and the report.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut cfg = cfg.clone();
    cfg.resolve_data_dir()?;
    cfg.validate()?;
    let corpus = load_corpus(&cfg)?;
    let granularity = cfg.task.granularity();
    let selection = parse_selection(&cfg.features);
    if selection.is_empty() {
        return Err(CliError::Config("feature selection is empty".into()));
    }
    let expanded = expand_selection(&selection);
    let mut sources = load_sources(&cfg, &corpus, &expanded)?;
    if expanded.iter().any(|s| s == RESILIENCE_COMPOSITE) {
        add_composite(&mut sources, &corpus, granularity)?;
    }
    let x_all = assemble_features(&corpus, &sources, &selection, granularity)?;

    // targets, keeping only labeled rows
    let state = task_state(cfg.task);
    let labels: HashMap<&str, f64> = match state {
        None => corpus.posts().filter_map(|p| p.wellbeing.map(|w| (p.post_id.as_str(), w))).collect(),
        Some(st) => corpus
            .sentences()
            .filter_map(|(_, _, s)| s.label(st).map(|l| (s.sentence_id.as_str(), if l { 1.0 } else { 0.0 })))
            .collect(),
    };
    let keep: Vec<usize> =
        x_all.row_ids.iter().enumerate().filter(|(_, id)| labels.contains_key(id.as_str())).map(|(i, _)| i).collect();
    if keep.is_empty() {
        return Err(CliError::Data(format!("no {} labels in the corpus", cfg.task.as_str())));
    }
    let x = x_all.select_rows(&keep);
    let mut y: Vec<f64> = x.row_ids.iter().map(|id| labels[id.as_str()]).collect();
    if let Some(shuffle_seed) = cfg.shuffle_labels {
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        log::info!("targets permuted with seed {shuffle_seed}");
    }

    let task = if state.is_some() { Task::Classification } else { Task::Regression };
    let plan = make_folds(&corpus, granularity, cfg.k, cfg.grouping(), cfg.seed)?;
    let cv = nested_cv(&x, &y, task, &cfg.grid, &plan)?;
    if let Err(bad) = cv.audit_leakage(&plan) {
        return Err(CliError::Internal(format!("fold leakage detected for {} row(s)", bad.len())));
    }

    let out = cfg.out.clone();
    create_out(&out)?;
    let mut files = Vec::new();

    let mut metrics_csv = String::from("metric,value\n");
    let mut predictions_csv = String::from("row_id,y_true,y_pred,fold\n");
    for p in &cv.predictions {
        predictions_csv.push_str(&format!("{},{},{},{}\n", csv_field(&p.row_id), p.y_true, p.y_pred, p.fold));
    }
    files.push(write_text(&out, "predictions.csv", &predictions_csv)?);
    files.push(write_json(&out, "cv_result.json", &cv)?);

    let mut report_metrics: BTreeMap<String, f64> = cv.metrics.clone();
    let mut timeline = None;
    let mut recall = None;
    let mut predicted_spans = Vec::new();
    let mut histograms: Vec<(String, Histogram)> = Vec::new();
    let preds: HashMap<String, f64> = cv.predictions.iter().map(|p| (p.row_id.clone(), p.y_pred)).collect();

    match state {
        None => {
            let t = timeline_mse(&corpus, &preds, &cfg.bands)?;
            if let Some(v) = t.overall {
                report_metrics.insert("timeline_mse".into(), v);
            }
            for (band, v) in &t.per_band {
                if let Some(v) = v {
                    report_metrics.insert(format!("timeline_mse_{band}"), *v);
                }
            }
            files.push(write_json(&out, "timeline.json", &t)?);
            timeline = Some(t);
        }
        Some(st) => {
            let mut jsonl = String::new();
            for post in corpus.posts() {
                if post.sentences.iter().any(|s| !preds.contains_key(&s.sentence_id)) {
                    log::debug!("no evidence for {}: some sentences lack a prediction", post.post_id);
                    continue;
                }
                let spans = extract_evidence(post, &preds, st, &cfg.thresholds)?;
                #[derive(Serialize)]
                struct Line<'a> {
                    post_id: &'a str,
                    spans: &'a [EvidenceSpan],
                }
                jsonl.push_str(&serde_json::to_string(&Line { post_id: &post.post_id, spans: &spans }).expect("spans serialize"));
                jsonl.push('\n');
                predicted_spans.extend(spans);
            }
            files.push(write_text(&out, "evidence_spans.jsonl", &jsonl)?);
            let gold: Vec<EvidenceSpan> =
                corpus.posts().flat_map(|p| p.gold_spans.iter().filter(|s| s.state == st).cloned()).collect();
            let r = span_recall(&gold, &predicted_spans, DEFAULT_OVERLAP_MIN);
            let (hit, weighted) = match st {
                SelfState::Adaptive => (r.recall_adaptive, r.weighted_recall_adaptive),
                SelfState::Maladaptive => (r.recall_maladaptive, r.weighted_recall_maladaptive),
            };
            if let Some(v) = hit {
                report_metrics.insert("span_recall".into(), v);
            }
            if let Some(v) = weighted {
                report_metrics.insert("span_recall_weighted".into(), v);
            }
            recall = Some(r);

            let probs = |want: Option<f64>| -> Vec<f64> {
                cv.predictions.iter().filter(|p| want.is_none_or(|w| p.y_true == w)).map(|p| p.y_pred).collect()
            };
            for (name, want) in [("all", None), ("positive", Some(1.0)), ("negative", Some(0.0))] {
                histograms.push((name.to_string(), probability_histogram(&probs(want), cfg.histogram_bins)?));
            }
        }
    }
    for (m, v) in &report_metrics {
        metrics_csv.push_str(&format!("{},{}\n", csv_field(m), v));
    }
    files.push(write_text(&out, "metrics.csv", &metrics_csv)?);

    let correlations = feature_correlations(&x, &y)?;
    let betas = match (task, cv.modal_penalty()) {
        (Task::Regression, Some(penalty)) => {
            let model = fit_ridge(&x.values, &y, penalty, &x.column_names)
                .map_err(|e| CliError::Data(format!("full-data refit failed: {e}")))?;
            model_betas(&model)?
        }
        _ => Vec::new(),
    };
    let report = InsightReport {
        feature_set: cfg.features.clone(),
        task: cfg.task.as_str().to_string(),
        correlations,
        betas,
        metrics: report_metrics,
        histograms,
    };
    for f in emit_report(std::slice::from_ref(&report), out.join("report"))? {
        files.push(format!("report/{f}"));
    }

    let mut inputs: Vec<PathBuf> = vec![cfg.corpus_path()?.to_path_buf()];
    inputs.extend(cfg.sources.iter().map(|s| s.path.clone()));
    if sources.get("resilience", Granularity::Sentence).is_some() && !cfg.sources.iter().any(|s| s.name == "resilience") {
        inputs.extend(cfg.embeddings.clone());
        inputs.extend(cfg.prototypes.clone());
    }
    write_manifest(&out, "run", &cfg, &inputs, &files)?;
    files.push("manifest.json".into());

    Ok(RunOutcome {
        n_columns: x.ncols(),
        n_rows: x.nrows(),
        column_names: x.column_names.clone(),
        cv,
        timeline,
        span_recall: recall,
        predicted_spans,
        report,
        files,
    })
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredSpan {
    char_start: usize,
    char_end: usize,
    state: SelfState,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredPost {
    post_id: String,
    #[serde(default)]
    wellbeing: Option<f64>,
    #[serde(default)]
    spans: Vec<PredSpan>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredFile {
    posts: Vec<PredPost>,
}

#[derive(Serialize)]
struct ScoreFile<'a> {
    span_recall: &'a SpanRecall,
    timeline: Option<&'a TimelineMse>,
}

/// Score a prediction file against a gold corpus. Writes `score.json` and
/// `scores.csv` to `cfg.out` and returns the flat metric list.
pub fn cmd_score(cfg: &RunConfig, gold: &Path, pred: &Path) -> Result<Vec<(String, f64)>, CliError> {
    let corpus = load_corpus_with_range(gold, cfg.score_range)?;
    let text = fs::read_to_string(pred).map_err(|e| io_err(pred, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let preds: PredFile = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Data(format!("malformed predictions {}: {e}", pred.display())))?;

    let mut unknown = Vec::new();
    let mut spans = Vec::new();
    let mut wellbeing = HashMap::new();
    for p in &preds.posts {
        let Some(post) = corpus.post(&p.post_id) else {
            unknown.push(p.post_id.clone());
            continue;
        };
        for s in &p.spans {
            if s.char_start > s.char_end || s.char_end > post.char_len() {
                return Err(CliError::Data(format!(
                    "span {}..{} outside post {} ({} chars)",
                    s.char_start,
                    s.char_end,
                    p.post_id,
                    post.char_len()
                )));
            }
            spans.push(EvidenceSpan {
                post_id: p.post_id.clone(),
                char_start: s.char_start,
                char_end: s.char_end,
                state: s.state,
            });
        }
        if let Some(w) = p.wellbeing {
            wellbeing.insert(p.post_id.clone(), w);
        }
    }
    if !unknown.is_empty() {
        return Err(CliError::Data(format!(
            "{} predicted post id(s) not in the gold corpus: {}",
            unknown.len(),
            unknown.join(", ")
        )));
    }

    let gold_spans: Vec<EvidenceSpan> = corpus.posts().flat_map(|p| p.gold_spans.iter().cloned()).collect();
    let recall = span_recall(&gold_spans, &spans, DEFAULT_OVERLAP_MIN);
    let timeline = if wellbeing.is_empty() { None } else { Some(timeline_mse(&corpus, &wellbeing, &cfg.bands)?) };

    let mut flat: Vec<(String, f64)> = Vec::new();
    for (name, v) in [
        ("recall_overall", recall.recall_overall),
        ("recall_adaptive", recall.recall_adaptive),
        ("recall_maladaptive", recall.recall_maladaptive),
        ("weighted_recall_overall", recall.weighted_recall_overall),
        ("weighted_recall_adaptive", recall.weighted_recall_adaptive),
        ("weighted_recall_maladaptive", recall.weighted_recall_maladaptive),
    ] {
        if let Some(v) = v {
            flat.push((name.into(), v));
        }
    }
    if let Some(t) = &timeline {
        if let Some(v) = t.overall {
            flat.push(("timeline_mse".into(), v));
        }
        for (band, v) in &t.per_band {
            if let Some(v) = v {
                flat.push((format!("timeline_mse_{band}"), *v));
            }
        }
    }

    create_out(&cfg.out)?;
    let mut outputs = vec![write_json(&cfg.out, "score.json", &ScoreFile { span_recall: &recall, timeline: timeline.as_ref() })?];
    let mut csv = String::from("metric,value\n");
    for (m, v) in &flat {
        csv.push_str(&format!("{},{}\n", csv_field(m), v));
    }
    outputs.push(write_text(&cfg.out, "scores.csv", &csv)?);
    write_manifest(&cfg.out, "score", cfg, &[gold.to_path_buf(), pred.to_path_buf()], &outputs)?;
    Ok(flat)
}
