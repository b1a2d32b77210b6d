use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::learner::{fit_logistic, fit_ridge, FittedLinearModel, LearnerError};

use super::folds::{FoldPlan, Grouping};
use super::metrics::{auc, classification_report, log_loss, mse, pearson_r};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Decision threshold used for the label-level classification metrics.
const LABEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledPrediction {
    pub row_id: String,
    pub y_true: f64,
    pub y_pred: f64,
    pub fold: usize,
}

/// What happened in one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    /// Chosen penalty; `None` when the fold was skipped.
    pub penalty: Option<f64>,
    /// Mean inner validation loss per grid value, ascending penalty order.
    pub inner_losses: Vec<(f64, f64)>,
    pub n_train: usize,
    pub n_test: usize,
    /// Sorted groups of the rows the outer model was trained on.
    pub train_groups: Vec<String>,
    pub converged: Option<bool>,
    pub skipped: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub task: Task,
    pub k: usize,
    pub grouping: Grouping,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub column_names: Vec<String>,
    /// Out-of-fold predictions in feature-matrix row order.
    pub predictions: Vec<PooledPrediction>,
    pub folds: Vec<FoldRecord>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl CvResult {
    /// Confirm that no pooled prediction came from a model trained on its own
    /// group. Returns the offending row ids otherwise.
    pub fn audit_leakage(&self, plan: &FoldPlan) -> Result<(), Vec<String>> {
        let by_fold: HashMap<usize, BTreeSet<&str>> = self
            .folds
            .iter()
            .map(|f| (f.fold, f.train_groups.iter().map(String::as_str).collect()))
            .collect();
        let bad: Vec<String> = self
            .predictions
            .iter()
            .filter(|p| {
                let group = plan.group_of(&p.row_id);
                match (group, by_fold.get(&p.fold)) {
                    (Some(g), Some(train)) => train.contains(g),
                    _ => true,
                }
            })
            .map(|p| p.row_id.clone())
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    pub fn prediction_map(&self) -> HashMap<&str, f64> {
        self.predictions.iter().map(|p| (p.row_id.as_str(), p.y_pred)).collect()
    }

    /// Most frequently chosen penalty; ties go to the smaller value.
    pub fn modal_penalty(&self) -> Option<f64> {
        let mut counts: Vec<(f64, usize)> = Vec::new();
        for lam in self.folds.iter().filter_map(|f| f.penalty) {
            match counts.iter_mut().find(|(l, _)| *l == lam) {
                Some((_, c)) => *c += 1,
                None => counts.push((lam, 1)),
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
        counts.first().map(|(l, _)| *l)
    }
}

pub(crate) fn fit_task(
    task: Task,
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: f64,
    names: &[String],
) -> Result<FittedLinearModel, LearnerError> {
    match task {
        Task::Regression => fit_ridge(x, y, penalty, names),
        Task::Classification => fit_logistic(x, y, penalty, names),
    }
}

fn loss(task: Task, y: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    match task {
        Task::Regression => mse(y, pred),
        Task::Classification => log_loss(y, pred),
    }
}

fn single_class(y: &[f64]) -> bool {
    y.windows(2).all(|w| w[0] == w[1])
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Metrics over a set of predictions. Undefined metrics are omitted.
pub(crate) fn metric_block(task: Task, y: &[f64], pred: &[f64]) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("n".to_string(), y.len() as f64);
    match task {
        Task::Regression => {
            if let Ok(r) = pearson_r(y, pred) {
                m.insert("pearson_r".into(), r);
            }
            if let Ok(e) = mse(y, pred) {
                m.insert("mse".into(), e);
            }
        }
        Task::Classification => {
            let truth: Vec<bool> = y.iter().map(|v| *v == 1.0).collect();
            let labels: Vec<bool> = pred.iter().map(|p| *p >= LABEL_THRESHOLD).collect();
            if let Ok(a) = auc(&truth, pred) {
                m.insert("auc".into(), a);
            }
            if let Ok(l) = log_loss(y, pred) {
                m.insert("log_loss".into(), l);
            }
            if let Ok(rep) = classification_report(&truth, &labels) {
                m.insert("f1_macro".into(), rep.f1_macro);
                m.insert("f1_weighted".into(), rep.f1_weighted);
                m.insert("accuracy".into(), rep.accuracy);
            }
        }
    }
    m
}

struct Selection {
    penalty: f64,
    losses: Vec<(f64, f64)>,
    note: Option<String>,
}

/// Inner cross-validation over `train` (indices into the full matrix).
#[allow(clippy::too_many_arguments)]
fn select_penalty(
    task: Task,
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
    grid: &[f64],
    train: &[usize],
    inner_fold: &[usize],
) -> Selection {
    if grid.len() == 1 {
        return Selection { penalty: grid[0], losses: Vec::new(), note: None };
    }
    let ids: BTreeSet<usize> = inner_fold.iter().copied().collect();
    if ids.len() < 2 {
        return Selection {
            penalty: grid[0],
            losses: Vec::new(),
            note: Some("fewer than two inner folds; using the smallest penalty".into()),
        };
    }
    let mut losses = Vec::with_capacity(grid.len());
    for &lam in grid {
        let mut fold_losses = Vec::new();
        let mut failed = false;
        for &j in &ids {
            let fit_idx: Vec<usize> =
                train.iter().zip(inner_fold).filter(|(_, f)| **f != j).map(|(i, _)| *i).collect();
            let val_idx: Vec<usize> =
                train.iter().zip(inner_fold).filter(|(_, f)| **f == j).map(|(i, _)| *i).collect();
            let y_fit = pick(y, &fit_idx);
            if task == Task::Classification && single_class(&y_fit) {
                continue;
            }
            let model = match fit_task(task, &x.select_rows(&fit_idx), &y_fit, lam, names) {
                Ok(m) => m,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            let pred = model.predict(&x.select_rows(&val_idx)).expect("column count fixed");
            fold_losses.push(loss(task, &pick(y, &val_idx), &pred).expect("non-empty validation fold"));
        }
        let mean = if failed || fold_losses.is_empty() {
            f64::INFINITY
        } else {
            fold_losses.iter().sum::<f64>() / fold_losses.len() as f64
        };
        losses.push((lam, mean));
    }
    // grid is ascending, so strict improvement keeps the smallest penalty on ties
    let mut best = 0;
    for (i, (_, l)) in losses.iter().enumerate() {
        if *l < losses[best].1 {
            best = i;
        }
    }
    let note = losses.iter().all(|(_, l)| !l.is_finite()).then(|| "no inner fit succeeded".to_string());
    Selection { penalty: losses[best].0, losses, note }
}

/// Nested cross-validation.
///
/// Each outer fold of `plan` is held out in turn. On the remaining rows the
/// penalty is chosen by inner cross-validation whose folds are the other
/// outer folds (for `k = 2` the training groups are re-dealt into two inner
/// folds), minimizing mean inner MSE (regression) or log-loss
/// (classification) with ties going to the smallest penalty. The model is
/// refit on the whole outer-training split and predicts the held-out rows.
pub fn nested_cv(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    grid: &[f64],
    plan: &FoldPlan,
) -> Result<CvResult, EvalError> {
    if x.nrows() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    let mut grid: Vec<f64> = grid.to_vec();
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut folds_of_rows = Vec::with_capacity(x.nrows());
    let mut groups_of_rows = Vec::with_capacity(x.nrows());
    for id in &x.row_ids {
        folds_of_rows.push(plan.fold_of(id).ok_or_else(|| EvalError::UncoveredRow(id.clone()))?);
        groups_of_rows.push(plan.group_of(id).expect("covered").to_string());
    }

    let mut slots: Vec<Option<PooledPrediction>> = vec![None; x.nrows()];
    let mut records = Vec::with_capacity(plan.k);
    let mut warnings = Vec::new();

    for fold in 0..plan.k {
        let test: Vec<usize> = (0..x.nrows()).filter(|&i| folds_of_rows[i] == fold).collect();
        let train: Vec<usize> = (0..x.nrows()).filter(|&i| folds_of_rows[i] != fold).collect();
        let mut record = FoldRecord {
            fold,
            penalty: None,
            inner_losses: Vec::new(),
            n_train: train.len(),
            n_test: test.len(),
            train_groups: Vec::new(),
            converged: None,
            skipped: None,
            metrics: BTreeMap::new(),
        };
        let skip = |record: &mut FoldRecord, warnings: &mut Vec<String>, why: String| {
            warnings.push(format!("fold {fold} skipped: {why}"));
            record.skipped = Some(why);
        };
        if test.is_empty() {
            skip(&mut record, &mut warnings, "no rows in fold".into());
            records.push(record);
            continue;
        }
        let y_train = pick(y, &train);
        if task == Task::Classification && single_class(&y_train) {
            skip(&mut record, &mut warnings, "training split contains a single class".into());
            records.push(record);
            continue;
        }

        let mut inner: Vec<usize> = train.iter().map(|&i| folds_of_rows[i]).collect();
        let distinct: BTreeSet<usize> = inner.iter().copied().collect();
        if distinct.len() < 2 {
            inner = redeal(&train, &groups_of_rows, plan.seed, fold);
        }
        let sel = select_penalty(task, &x.values, y, &x.column_names, &grid, &train, &inner);
        if let Some(note) = sel.note {
            warnings.push(format!("fold {fold}: {note}"));
        }
        record.inner_losses = sel.losses;

        let model = match fit_task(task, &x.values.select_rows(&train), &y_train, sel.penalty, &x.column_names) {
            Ok(m) => m,
            Err(e) => {
                skip(&mut record, &mut warnings, format!("fit failed: {e}"));
                records.push(record);
                continue;
            }
        };
        if !model.converged {
            warnings.push(format!("fold {fold}: optimizer did not converge"));
        }
        let pred = model.predict(&x.values.select_rows(&test)).expect("column count fixed");
        for (&i, &p) in test.iter().zip(&pred) {
            slots[i] = Some(PooledPrediction { row_id: x.row_ids[i].clone(), y_true: y[i], y_pred: p, fold });
        }
        let train_groups: BTreeSet<&str> = train.iter().map(|&i| groups_of_rows[i].as_str()).collect();
        record.train_groups = train_groups.into_iter().map(String::from).collect();
        record.penalty = Some(sel.penalty);
        record.converged = Some(model.converged);
        record.metrics = metric_block(task, &pick(y, &test), &pred);
        records.push(record);
    }

    let predictions: Vec<PooledPrediction> = slots.into_iter().flatten().collect();
    let yt: Vec<f64> = predictions.iter().map(|p| p.y_true).collect();
    let yp: Vec<f64> = predictions.iter().map(|p| p.y_pred).collect();
    let metrics = if predictions.is_empty() { BTreeMap::new() } else { metric_block(task, &yt, &yp) };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(CvResult {
        task,
        k: plan.k,
        grouping: plan.grouping,
        seed: plan.seed,
        grid,
        column_names: x.column_names.clone(),
        predictions,
        folds: records,
        metrics,
        warnings,
    })
}

/// Two inner folds from the training groups, seeded by the plan seed and fold.
fn redeal(train: &[usize], groups: &[String], seed: u64, fold: usize) -> Vec<usize> {
    let mut distinct: Vec<&str> = Vec::new();
    for &i in train {
        if !distinct.contains(&groups[i].as_str()) {
            distinct.push(groups[i].as_str());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(fold as u64 + 1)));
    distinct.shuffle(&mut rng);
    let of: HashMap<&str, usize> = distinct.iter().enumerate().map(|(i, g)| (*g, i % 2)).collect();
    train.iter().map(|&i| of[groups[i].as_str()]).collect()
}
