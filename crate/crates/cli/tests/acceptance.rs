//! Acceptance suite. Each criterion runs against its own independent oracle
//! and prints one PASS/FAIL line; the process exits non-zero if any fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use wellstate::commands::{annotate_with_backend, cmd_run, cmd_score, cmd_synth};
use wellstate::{Preset, RunConfig};
use wellstate_core::annotate::{
    annotate_corpus, parse_response, Annotator, Dimension, LlmBackend, MockBackend, ParseError, ReplayBackend,
    ResponseCache, SpecSet,
};
use wellstate_core::corpus::save_corpus;
use wellstate_core::eval::{
    auc, classification_report, extract_evidence, nested_cv, pearson_r, FoldPlan, Grouping, Task, ThresholdConfig,
};
use wellstate_core::features::composite_factor;
use wellstate_core::insight::{emit_report, feature_correlations, FeatureValue, InsightReport};
use wellstate_core::learner::{fit_logistic, fit_ridge, logistic_gradient, logistic_objective};
use wellstate_core::{Corpus, EvidenceSpan, FeatureMatrix, Post, SelfState, Timeline};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(box_muller())
}

// Box-Muller over the uniform generator; keeps the oracles free of the
// library's own sampling code.
fn box_muller() -> impl rand::distr::Distribution<f64> {
    struct BoxMuller;
    impl rand::distr::Distribution<f64> for BoxMuller {
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }
    BoxMuller
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| normal(rng))
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

// population z-scoring, written out independently of the learner
fn zscore(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let m = col.iter().sum::<f64>() / n;
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        let s = if s < 1e-12 { 1.0 } else { s };
        col.apply(|v| *v = (*v - m) / s);
    }
    z
}

// ------------------------------------------------------------------ 1

fn solver_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_ridge = 0.0f64;
    for case in 0..1000 {
        let p = rng.random_range(1..=10);
        let n = rng.random_range(3..=50);
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| 3.0 * normal(&mut rng) + 1.0).collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..2.0));
        let model = fit_ridge(&x, &y, lambda, &names(p)).map_err(|e| format!("ridge case {case}: {e}"))?;
        let again = fit_ridge(&x, &y, lambda, &names(p)).unwrap();
        ensure!(model == again, "ridge case {case} not deterministic");

        let z = zscore(&x);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = nalgebra::DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let w = nalgebra::DVector::from_column_slice(&model.weights);
        let lhs = z.transpose() * &z * &w + &w * lambda;
        let rhs = z.transpose() * &yc;
        let scale = 1.0 + rhs.amax();
        let resid = (lhs - &rhs).amax() / scale;
        worst_ridge = worst_ridge.max(resid);
        ensure!(resid <= 1e-8, "ridge case {case}: normal-equation residual {resid:e}");
        ensure!((model.intercept - y_mean).abs() <= 1e-8 * (1.0 + y_mean.abs()), "ridge case {case}: intercept");
    }

    let mut worst_grad = 0.0f64;
    for case in 0..100 {
        let p = rng.random_range(1..=10);
        let n = rng.random_range(4..=50);
        let z = random_matrix(&mut rng, n, p);
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        y[0] = 0.0;
        y[1] = 1.0;
        let w: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let b = normal(&mut rng);
        let lambda = rng.random_range(0.0..2.0);
        let g = logistic_gradient(&z, &y, &w, b, lambda);
        let h = 1e-6;
        for j in 0..=p {
            let eval = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < p {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                logistic_objective(&z, &y, &w2, b2, lambda)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (g[j] - fd).abs() / g[j].abs().max(1.0);
            worst_grad = worst_grad.max(rel);
            ensure!(rel <= 1e-5, "logistic case {case}, coord {j}: analytic {} vs fd {fd}", g[j]);
        }
        let m1 = fit_logistic(&z, &y, lambda.max(0.1), &names(p)).map_err(|e| e.to_string())?;
        let m2 = fit_logistic(&z, &y, lambda.max(0.1), &names(p)).map_err(|e| e.to_string())?;
        ensure!(m1 == m2, "logistic case {case} not deterministic");
    }
    Ok(format!("max ridge residual {worst_ridge:.2e}, max gradient rel error {worst_grad:.2e}"))
}

// ------------------------------------------------------------------ 2

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = rng.random_range(2..=100);
        let mut y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        y[0] = true;
        y[1] = false;
        // coarse scores so ties are common
        let s: Vec<f64> = (0..n).map(|_| (rng.random_range(0..12) as f64) / 11.0).collect();
        let mut pairs = 0.0;
        let (mut np, mut nn) = (0usize, 0usize);
        for i in 0..n {
            if y[i] {
                np += 1;
            } else {
                nn += 1;
            }
            for j in 0..n {
                if y[i] && !y[j] {
                    pairs += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let oracle = pairs / (np as f64 * nn as f64);
        let got = auc(&y, &s).map_err(|e| e.to_string())?;
        ensure!(got == oracle, "auc case {case}: {got} vs pair count {oracle}");
    }

    for case in 0..200 {
        let n = rng.random_range(1..=100);
        let t: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let p: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let mut cm = [[0f64; 2]; 2];
        for i in 0..n {
            cm[t[i] as usize][p[i] as usize] += 1.0;
        }
        let f1 = |tp: f64, fp: f64, fn_: f64| if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        let f1_pos = f1(cm[1][1], cm[0][1], cm[1][0]);
        let f1_neg = f1(cm[0][0], cm[1][0], cm[0][1]);
        let present_pos = cm[1][0] + cm[1][1] + cm[0][1] > 0.0;
        let present_neg = cm[0][0] + cm[0][1] + cm[1][0] > 0.0;
        let present: Vec<f64> = [(present_neg, f1_neg), (present_pos, f1_pos)]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, f)| *f)
            .collect();
        let macro_ = present.iter().sum::<f64>() / present.len() as f64;
        let weighted = (f1_neg * (cm[0][0] + cm[0][1]) + f1_pos * (cm[1][0] + cm[1][1])) / n as f64;
        let acc = (cm[0][0] + cm[1][1]) / n as f64;
        let r = classification_report(&t, &p).map_err(|e| e.to_string())?;
        ensure!((r.f1_macro - macro_).abs() < 1e-12, "f1 macro case {case}: {} vs {macro_}", r.f1_macro);
        ensure!((r.f1_weighted - weighted).abs() < 1e-12, "f1 weighted case {case}");
        ensure!((r.accuracy - acc).abs() < 1e-12, "accuracy case {case}");
        ensure!((r.per_class[1].f1 - f1_pos).abs() < 1e-12, "positive f1 case {case}");
    }

    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(3..=100);
        let a: Vec<f64> = (0..n).map(|_| normal(&mut rng) * 5.0 + 2.0).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.3 * v + normal(&mut rng)).collect();
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in 0..n {
            sab += (a[i] - ma) * (b[i] - mb);
            saa += (a[i] - ma).powi(2);
            sbb += (b[i] - mb).powi(2);
        }
        let oracle = sab / (saa * sbb).sqrt();
        let got = pearson_r(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle).abs());
        ensure!((got - oracle).abs() <= 1e-12, "pearson case {case}: {got} vs {oracle}");
    }
    Ok(format!("100 AUC exact, 200 F1/accuracy, pearson max diff {worst:.1e}"))
}

// ------------------------------------------------------------------ 3

// cyclic Jacobi rotations until off-diagonal mass vanishes
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for k in 0..n {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn correlation(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let z = zscore(x);
    let n = x.nrows() as f64;
    let p = x.ncols();
    (0..p).map(|i| (0..p).map(|j| z.column(i).dot(&z.column(j)) / n).collect()).collect()
}

fn factor_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.random_range(20..=200);
        let f: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let loadings: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..1.0)).collect();
        let x = DMatrix::from_fn(n, 9, |i, j| loadings[j] * f[i] + 0.8 * normal(&mut rng));
        let cf = composite_factor(&x).map_err(|e| format!("case {case}: {e}"))?;
        let eig = jacobi_eigenvalues(correlation(&x));
        let top = eig.iter().cloned().fold(f64::MIN, f64::max);
        let diff = (cf.variance_explained - top / 9.0).abs();
        worst = worst.max(diff);
        ensure!(diff <= 1e-8, "case {case}: variance_explained {} vs oracle {}", cf.variance_explained, top / 9.0);
    }
    let mut rank1_min = f64::MAX;
    for _ in 0..10 {
        let n = rng.random_range(20..=100);
        let f: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let a: Vec<f64> = (0..9).map(|_| rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let b: Vec<f64> = (0..9).map(|_| normal(&mut rng)).collect();
        let x = DMatrix::from_fn(n, 9, |i, j| a[j] * f[i] + b[j]);
        let cf = composite_factor(&x).map_err(|e| e.to_string())?;
        rank1_min = rank1_min.min(cf.variance_explained);
    }
    ensure!(rank1_min >= 0.999, "rank-1 facets explain only {rank1_min}");
    Ok(format!("max diff vs Jacobi {worst:.1e}, rank-1 min variance explained {rank1_min:.12}"))
}

// ------------------------------------------------------------------ 4

fn planted_signal() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let mut cfg = RunConfig { seed: 42, out: data.clone(), ..RunConfig::default() };
    cfg.synth.preset = Preset::FullScale;
    cmd_synth(&cfg).map_err(|e| e.to_string())?;

    let mut run = RunConfig { seed: 42, data_dir: Some(data), features: "plt".into(), ..RunConfig::default() };
    run.out = dir.path().join("run");
    let outcome = cmd_run(&run).map_err(|e| e.to_string())?;
    ensure!(outcome.n_rows == 330 && outcome.n_columns == 19, "unexpected shape {}x{}", outcome.n_rows, outcome.n_columns);
    let y: Vec<f64> = outcome.cv.predictions.iter().map(|p| p.y_true).collect();
    let yhat: Vec<f64> = outcome.cv.predictions.iter().map(|p| p.y_pred).collect();
    let r = pearson_r(&y, &yhat).map_err(|e| e.to_string())?;
    ensure!((r - outcome.cv.metrics["pearson_r"]).abs() < 1e-12, "reported r disagrees with pooled predictions");
    ensure!(r >= 0.8, "planted r = {r:.4} < 0.8");

    let mut shuffled = Vec::new();
    for s in 0..20u64 {
        let mut control = run.clone();
        control.shuffle_labels = Some(1000 + s);
        control.out = dir.path().join(format!("shuffle{s}"));
        let o = cmd_run(&control).map_err(|e| e.to_string())?;
        shuffled.push(o.cv.metrics["pearson_r"]);
    }
    let max_shuffled = shuffled.iter().cloned().fold(f64::MIN, f64::max);
    ensure!(max_shuffled <= 0.15, "shuffled control reached r = {max_shuffled:.4}");
    ensure!(r > max_shuffled, "planted r {r} does not exceed control");
    let mean_shuffled = shuffled.iter().sum::<f64>() / shuffled.len() as f64;
    Ok(format!("r = {r:.4}; shuffled max {max_shuffled:.4}, mean {mean_shuffled:.4}"))
}

// ------------------------------------------------------------------ 5

fn leakage_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut predictions = 0usize;
    for case in 0..50 {
        let n_groups = rng.random_range(4..=15);
        let k = rng.random_range(2..=n_groups.min(6));
        let mut rows = Vec::new();
        let mut groups = Vec::new();
        for g in 0..n_groups {
            for r in 0..rng.random_range(2..=8) {
                rows.push(format!("g{g}.r{r}"));
                groups.push(format!("g{g}"));
            }
        }
        // give every group a row so the partition is non-trivial, then shuffle row order
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let rows: Vec<String> = order.iter().map(|&i| rows[i].clone()).collect();
        let groups: Vec<String> = order.iter().map(|&i| groups[i].clone()).collect();
        let plan = FoldPlan::from_groups(rows.clone(), groups.clone(), k, Grouping::ByUser, case as u64)
            .map_err(|e| e.to_string())?;
        let n = rows.len();
        let p = rng.random_range(1..=4);
        let values = random_matrix(&mut rng, n, p);
        let classify = case % 2 == 1;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let s = values[(i, 0)] + normal(&mut rng);
                if classify {
                    (s > 0.0) as u8 as f64
                } else {
                    s
                }
            })
            .collect();
        let x = FeatureMatrix { row_ids: rows.clone(), column_names: names(p), values };
        let task = if classify { Task::Classification } else { Task::Regression };
        let cv = nested_cv(&x, &y, task, &[0.1, 1.0, 10.0], &plan).map_err(|e| format!("case {case}: {e}"))?;
        cv.audit_leakage(&plan).map_err(|bad| format!("case {case}: audit flagged {bad:?}"))?;

        // oracle: rebuild each fold's training groups from the plan alone
        let group_of: HashMap<&str, &str> = rows.iter().map(String::as_str).zip(groups.iter().map(String::as_str)).collect();
        let fold_of: HashMap<&str, usize> = rows.iter().map(|r| (r.as_str(), plan.fold_of(r).unwrap())).collect();
        let mut seen = HashSet::new();
        for pred in &cv.predictions {
            ensure!(seen.insert(pred.row_id.clone()), "case {case}: {} predicted twice", pred.row_id);
            ensure!(fold_of[pred.row_id.as_str()] == pred.fold, "case {case}: fold mismatch");
            let g = group_of[pred.row_id.as_str()];
            let train_groups: HashSet<&str> =
                rows.iter().filter(|r| fold_of[r.as_str()] != pred.fold).map(|r| group_of[r.as_str()]).collect();
            ensure!(!train_groups.contains(g), "case {case}: group {g} in training for {}", pred.row_id);
            let recorded = cv.folds.iter().find(|f| f.fold == pred.fold).unwrap();
            ensure!(!recorded.train_groups.iter().any(|t| t == g), "case {case}: recorded training groups hold {g}");
            predictions += 1;
        }
        let skipped: usize = cv.folds.iter().filter(|f| f.skipped.is_some()).map(|f| f.n_test).sum();
        ensure!(cv.predictions.len() + skipped == n, "case {case}: {} predictions for {n} rows", cv.predictions.len());
    }
    Ok(format!("50 plans, {predictions} pooled predictions, zero overlap"))
}

// ------------------------------------------------------------------ 6

fn brute_force_spans(post: &Post, probs: &[f64], threshold: f64, state: SelfState) -> Vec<EvidenceSpan> {
    let sel: Vec<bool> = probs.iter().map(|p| *p >= threshold).collect();
    let m = sel.len();
    let mut out = Vec::new();
    for i in 0..m {
        for j in i..m {
            let inside = (i..=j).all(|t| sel[t]);
            let left_closed = i == 0 || !sel[i - 1];
            let right_closed = j + 1 == m || !sel[j + 1];
            if inside && left_closed && right_closed {
                out.push(EvidenceSpan {
                    post_id: post.post_id.clone(),
                    char_start: post.sentences[i].char_start,
                    char_end: post.sentences[j].char_end,
                    state,
                });
            }
        }
    }
    out
}

fn evidence_pipeline() -> Outcome {
    let thresholds = ThresholdConfig::default();
    ensure!(thresholds.adaptive == 0.45 && thresholds.maladaptive == 0.4, "default thresholds {thresholds:?}");
    let post = Post::from_text("b", 0, "I went for a walk. It was fine.");
    let probs = |p0: f64| HashMap::from([("b.s0".to_string(), p0), ("b.s1".to_string(), 0.0)]);
    let at = extract_evidence(&post, &probs(0.45), SelfState::Adaptive, &thresholds).map_err(|e| e.to_string())?;
    let below = extract_evidence(&post, &probs(0.4499), SelfState::Adaptive, &thresholds).map_err(|e| e.to_string())?;
    ensure!(at.len() == 1 && at[0].char_start == 0 && at[0].char_end == 18, "0.45 gave {at:?}");
    ensure!(below.is_empty(), "0.4499 gave {below:?}");
    let mal = extract_evidence(&post, &probs(0.4), SelfState::Maladaptive, &thresholds).map_err(|e| e.to_string())?;
    ensure!(mal.len() == 1, "maladaptive boundary 0.4 gave {mal:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let words = ["calm", "tired", "work", "sleep", "friends", "rain", "anxious", "hope"];
    let mut total_spans = 0;
    for case in 0..500 {
        let m = rng.random_range(1..=10);
        let text: Vec<String> = (0..m)
            .map(|_| {
                let w: Vec<&str> = (0..rng.random_range(1..=5)).map(|_| words[rng.random_range(0..words.len())]).collect();
                let mut s = w.join(" ");
                s.push(['.', '!', '?'][rng.random_range(0..3)]);
                s
            })
            .collect();
        let post = Post::from_text(format!("r{case}"), 0, text.join(" "));
        ensure!(post.sentences.len() == m, "case {case}: splitter gave {} sentences", post.sentences.len());
        let pv: Vec<f64> = (0..m)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.45,
                1 => 0.4,
                _ => rng.random::<f64>(),
            })
            .collect();
        let map: HashMap<String, f64> = post.sentences.iter().map(|s| s.sentence_id.clone()).zip(pv.iter().cloned()).collect();
        let state = if rng.random::<bool>() { SelfState::Adaptive } else { SelfState::Maladaptive };
        let got = extract_evidence(&post, &map, state, &thresholds).map_err(|e| e.to_string())?;
        let want = brute_force_spans(&post, &pv, thresholds.for_state(state), state);
        ensure!(got == want, "case {case}: {got:?} vs oracle {want:?}");
        total_spans += got.len();
    }

    // pred = gold through the score command
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig { seed: 8, out: dir.path().join("data"), ..RunConfig::default() };
    cmd_synth(&cfg).map_err(|e| e.to_string())?;
    let gold_path = dir.path().join("data/corpus.json");
    let corpus = wellstate_core::corpus::load_corpus(&gold_path).map_err(|e| e.to_string())?;
    let posts: Vec<Value> = corpus
        .posts()
        .map(|p| {
            let spans: Vec<Value> = p
                .gold_spans
                .iter()
                .map(|s| json!({"char_start": s.char_start, "char_end": s.char_end, "state": s.state}))
                .collect();
            json!({"post_id": p.post_id, "wellbeing": p.wellbeing, "spans": spans})
        })
        .collect();
    let pred_path = dir.path().join("pred.json");
    fs::write(&pred_path, json!({ "posts": posts }).to_string()).map_err(|e| e.to_string())?;
    cfg.out = dir.path().join("score");
    let scores: BTreeMap<String, f64> = cmd_score(&cfg, &gold_path, &pred_path).map_err(|e| e.to_string())?.into_iter().collect();
    for key in ["recall_overall", "recall_adaptive", "recall_maladaptive", "weighted_recall_overall"] {
        ensure!(scores.get(key) == Some(&1.0), "{key} = {:?}", scores.get(key));
    }
    ensure!(scores.get("timeline_mse") == Some(&0.0), "timeline mse {:?}", scores.get("timeline_mse"));
    Ok(format!("boundary ok, 500 posts ({total_spans} spans) match oracle, pred=gold recall 1.0"))
}

// ------------------------------------------------------------------ 7

fn check_parser_fixture() -> Result<usize, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/parser_cases.json");
    let fixture: Value = serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cases = fixture["cases"].as_array().ok_or("fixture has no cases")?;
    ensure!(cases.len() == 30, "fixture has {} cases", cases.len());
    for c in cases {
        let name = c["name"].as_str().unwrap();
        let dim = Dimension::from_key(c["dimension"].as_str().unwrap()).ok_or(format!("{name}: bad dimension"))?;
        let got = parse_response(c["raw"].as_str().unwrap(), c["text"].as_str().unwrap(), dim);
        let expect = &c["expect"];
        match (expect.get("error").and_then(Value::as_str), got) {
            (Some(kind), Err(e)) => {
                let actual = match e {
                    ParseError::NoJsonFound => "NoJsonFound",
                    ParseError::RatingMissing => "RatingMissing",
                    ParseError::InvalidRating(_) => "InvalidRating",
                    ParseError::RatingOutOfRange(_) => "RatingOutOfRange",
                };
                ensure!(actual == kind, "{name}: expected {kind}, got {actual}");
            }
            (Some(kind), Ok(s)) => return Err(format!("{name}: expected {kind}, parsed rating {}", s.rating)),
            (None, Err(e)) => return Err(format!("{name}: unexpected error {e}")),
            (None, Ok(s)) => {
                ensure!(s.dimension == dim, "{name}: dimension");
                ensure!(Some(s.rating as u64) == expect["rating"].as_u64(), "{name}: rating {}", s.rating);
                let spans: Vec<&str> = expect["spans"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
                let dropped: Vec<&str> = expect["dropped"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
                ensure!(s.supporting_spans == spans, "{name}: spans {:?}", s.supporting_spans);
                ensure!(s.dropped_spans == dropped, "{name}: dropped {:?}", s.dropped_spans);
                let text = c["text"].as_str().unwrap();
                ensure!(s.supporting_spans.iter().all(|sp| text.contains(sp.as_str())), "{name}: kept span not in text");
            }
        }
    }
    Ok(cases.len())
}

fn mock_corpus(users: usize, posts_per_user: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phrases = [
        "My manager piled on more deadlines.",
        "I spent the evening reading about history.",
        "Someone lied to me about the money.",
        "We laughed a lot at dinner with friends.",
        "Everything felt heavy and I stayed in bed.",
        "Went on a date and it went well.",
    ];
    let timelines = (0..users)
        .map(|u| Timeline {
            user_id: format!("m{u:03}"),
            posts: (0..posts_per_user)
                .map(|p| {
                    let mut text = vec![format!("Entry {p} from writer {u}.")];
                    text.extend((0..rng.random_range(1..=4)).map(|_| phrases[rng.random_range(0..phrases.len())].to_string()));
                    Post::from_text(format!("m{u:03}.p{p:02}"), p as i64, text.join(" "))
                })
                .collect(),
        })
        .collect();
    Corpus { timelines }
}

fn s8d_robustness() -> Outcome {
    let n_cases = check_parser_fixture()?;

    let corpus = mock_corpus(49, 7);
    ensure!(corpus.n_posts() == 343, "corpus has {} posts", corpus.n_posts());
    let specs = SpecSet::builtin();
    let mock = MockBackend::new();
    let cache = ResponseCache::in_memory();
    let start = Instant::now();
    let report = annotate_corpus(&Annotator::new(&mock).with_cache(&cache), &specs, &corpus);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "mock run took {elapsed:?}");
    ensure!(mock.calls() == 2744, "{} logical requests, expected 2744", mock.calls());
    ensure!(report.scores.len() == 343 && report.failures.is_empty(), "{} failures", report.failures.len());

    // replay through a recorded cache file, twice, via the annotate command
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("corpus.json");
    save_corpus(&corpus, &corpus_path).map_err(|e| e.to_string())?;
    let cache_path = dir.path().join("responses.jsonl");
    let mut cfg = RunConfig { corpus: Some(corpus_path), out: dir.path().join("record"), ..RunConfig::default() };
    cfg.backend.cache_file = Some(cache_path.clone());
    annotate_with_backend(&cfg, &MockBackend::new()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let replay = ReplayBackend::from_file(MockBackend::new().identity(), &cache_path).map_err(|e| e.to_string())?;
        let mut rcfg = cfg.clone();
        rcfg.backend.cache_file = None;
        rcfg.out = dir.path().join(format!("replay{run}"));
        let r = annotate_with_backend(&rcfg, &replay).map_err(|e| e.to_string())?;
        ensure!(r.failures.is_empty(), "replay {run}: {} failures", r.failures.len());
        let mut bytes = Vec::new();
        for f in ["s8d.post.csv", "annotations.json", "annotation_errors.json", "manifest.json"] {
            bytes.push(fs::read(rcfg.out.join(f)).map_err(|e| e.to_string())?);
        }
        outputs.push(bytes);
    }
    ensure!(outputs[0] == outputs[1], "replayed outputs differ");
    let recorded = fs::read(dir.path().join("record/s8d.post.csv")).map_err(|e| e.to_string())?;
    ensure!(recorded == outputs[0][0], "replayed ratings differ from the recorded run");
    Ok(format!("{n_cases} parser cases conform; 343 posts, 2744 requests in {:.2}s; replay byte-identical", elapsed.as_secs_f64()))
}

// ------------------------------------------------------------------ 8

fn attr(tag: &str, name: &str) -> Option<f64> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let end = start + tag[start..].find('"')?;
    tag[start..end].parse().ok()
}

fn report_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 60;
    let p = 12;
    let base = random_matrix(&mut rng, n, p);
    let y: Vec<f64> = (0..n).map(|i| (0..p).map(|j| base[(i, j)] * (j as f64 - 5.0) / 6.0).sum::<f64>() + normal(&mut rng)).collect();
    let x = FeatureMatrix { row_ids: (0..n).map(|i| format!("r{i}")).collect(), column_names: names(p), values: base };
    let correlations = feature_correlations(&x, &y).map_err(|e| e.to_string())?;
    let betas: Vec<FeatureValue> = (0..p)
        .map(|j| FeatureValue { feature: format!("x{j}"), value: normal(&mut rng) * 10f64.powi(rng.random_range(-2..2)), note: None })
        .collect();
    let report = InsightReport {
        feature_set: "random".into(),
        task: "wellbeing".into(),
        correlations,
        betas: betas.clone(),
        metrics: BTreeMap::new(),
        histograms: Vec::new(),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_report(std::slice::from_ref(&report), dir.path()).map_err(|e| e.to_string())?;

    let svg = fs::read_to_string(dir.path().join(format!("{}_betas.svg", report.name()))).map_err(|e| e.to_string())?;
    let bars: Vec<(f64, f64)> = svg
        .split('<')
        .filter(|t| t.starts_with("rect class=\"bar\""))
        .map(|t| (attr(t, "width").unwrap(), attr(t, "data-value").unwrap()))
        .collect();
    ensure!(bars.len() == p, "{} bars for {p} betas", bars.len());
    let max_abs = betas.iter().map(|b| b.value.abs()).fold(0.0, f64::max);
    let (wmax, _) = bars.iter().cloned().fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let mut worst = 0.0f64;
    for (w, v) in &bars {
        ensure!(betas.iter().any(|b| b.value == *v), "bar value {v} not among inputs");
        let expected = v.abs() / max_abs * wmax;
        let rel = if expected == 0.0 { *w } else { (w - expected).abs() / expected };
        worst = worst.max(rel);
        ensure!(rel <= 0.005, "bar for {v}: width {w}, expected {expected}");
    }

    let csv = fs::read_to_string(dir.path().join("correlations.csv")).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let (feature, r) = line.split_once(',').ok_or("bad csv line")?;
        let r: f64 = r.parse().map_err(|_| format!("bad r in {line}"))?;
        let col = x.column(feature).ok_or(format!("unknown column {feature}"))?;
        let oracle = pearson_r(&col, &y).map_err(|e| e.to_string())?;
        ensure!(r == oracle, "{feature}: csv {r} vs pearson_r {oracle}");
        rows += 1;
    }
    ensure!(rows == p, "correlations.csv has {rows} rows");
    Ok(format!("{} bars within {:.2e} relative, {rows} correlations exact", bars.len(), worst))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("solver oracles", solver_oracles, Duration::from_secs(30)),
        ("metric oracles", metric_oracles, Duration::from_secs(10)),
        ("factor oracle", factor_oracle, Duration::MAX),
        ("planted-signal end-to-end", planted_signal, Duration::from_secs(60)),
        ("nested-CV leakage audit", leakage_audit, Duration::MAX),
        ("evidence pipeline", evidence_pipeline, Duration::MAX),
        ("S8D robustness", s8d_robustness, Duration::MAX),
        ("report fidelity", report_fidelity, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > budget => Err(format!("took {:.2}s, budget {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64())),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name:<28} {:>7.2}s  {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<28} {:>7.2}s  {detail}", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
