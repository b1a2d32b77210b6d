//! Interpretability reports: feature correlations, standardized model
//! weights, probability histograms, and their CSV/SVG renderings.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{pearson_r, EvalError};
use crate::features::FeatureMatrix;
use crate::learner::{FittedLinearModel, ModelKind};

pub use svg::{bar_chart_svg, histogram_svg, BAR_AREA_WIDTH};

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum InsightError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("bins must be at least 1")]
    InvalidBins,
    #[error("betas need a ridge model, got {0:?}")]
    WrongKind(ModelKind),
    #[error("non-finite value for {0}")]
    NonFinite(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A named signed quantity attached to a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub feature: String,
    pub value: f64,
    /// Set when the value is a convention rather than an estimate (constant column).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Pearson r of each column against `y`, in column order. Constant columns
/// get r = 0 with a note.
pub fn feature_correlations(x: &FeatureMatrix, y: &[f64]) -> Result<Vec<FeatureValue>, InsightError> {
    if x.nrows() != y.len() {
        return Err(InsightError::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    let mut out = Vec::with_capacity(x.ncols());
    for (j, name) in x.column_names.iter().enumerate() {
        let col: Vec<f64> = x.values.column(j).iter().copied().collect();
        let (value, note) = match pearson_r(&col, y) {
            Ok(r) => (r, None),
            Err(EvalError::ConstantInput) => (0.0, Some("constant".to_string())),
            Err(e) => return Err(e.into()),
        };
        out.push(FeatureValue { feature: name.clone(), value, note });
    }
    Ok(out)
}

/// Standardized-space ridge weights paired with their column names.
pub fn model_betas(model: &FittedLinearModel) -> Result<Vec<FeatureValue>, InsightError> {
    if model.kind != ModelKind::Ridge {
        return Err(InsightError::WrongKind(model.kind));
    }
    Ok(model
        .column_names
        .iter()
        .zip(&model.weights)
        .map(|(n, w)| FeatureValue { feature: n.clone(), value: *w, note: None })
        .collect())
}

/// Descending by magnitude, ties broken by feature name.
pub fn sort_by_magnitude(rows: &mut [FeatureValue]) {
    rows.sort_by(|a, b| b.value.abs().total_cmp(&a.value.abs()).then_with(|| a.feature.cmp(&b.feature)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges over [0, 1].
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over [0, 1]; the last bin includes 1. Values within 1e-9
/// of an inner edge count toward the bin starting at that edge.
pub fn probability_histogram(probs: &[f64], bins: usize) -> Result<Histogram, InsightError> {
    if bins == 0 {
        return Err(InsightError::InvalidBins);
    }
    let mut counts = vec![0usize; bins];
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(InsightError::OutOfRange(p));
        }
        let scaled = p * bins as f64;
        let snapped = if (scaled - scaled.round()).abs() < 1e-9 { scaled.round() } else { scaled.floor() };
        counts[(snapped as usize).min(bins - 1)] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(Histogram { edges, counts })
}

/// Everything reported for one feature set and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightReport {
    pub feature_set: String,
    pub task: String,
    pub correlations: Vec<FeatureValue>,
    /// Empty for classification models.
    pub betas: Vec<FeatureValue>,
    pub metrics: BTreeMap<String, f64>,
    pub histograms: Vec<(String, Histogram)>,
}

impl InsightReport {
    pub fn name(&self) -> String {
        slug(&format!("{}_{}", self.task, self.feature_set))
    }
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    reports: Vec<String>,
    files: &'a [String],
}

/// Write CSVs, SVG charts and a manifest into `out_dir`.
///
/// `correlations.csv` (`feature,r`) and `betas.csv` (`feature,beta`) hold
/// rows sorted by magnitude; with more than one report the feature field is
/// qualified as `<report>:<feature>`. `metrics.csv` has one row per metric.
/// Each report gets its own bar-chart SVGs. Output bytes depend only on the
/// reports. Returns the written file names, manifest last.
pub fn emit_report(reports: &[InsightReport], out_dir: impl AsRef<Path>) -> Result<Vec<String>, InsightError> {
    let dir = out_dir.as_ref();
    let write = |name: &str, content: &str| {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|source| InsightError::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| InsightError::Io { path: dir.into(), source })?;
    let mut files = Vec::new();
    if !reports.is_empty() {
        let qualify = reports.len() > 1;
        let mut corr = String::from("feature,r\n");
        let mut betas = String::from("feature,beta\n");
        let mut metrics = String::from("feature_set,task,metric,value\n");
        for report in reports {
            let prefix = if qualify { format!("{}:", report.name()) } else { String::new() };
            let mut c = report.correlations.clone();
            sort_by_magnitude(&mut c);
            for row in &c {
                corr.push_str(&format!("{},{}\n", csv_field(&format!("{prefix}{}", row.feature)), row.value));
            }
            let mut b = report.betas.clone();
            sort_by_magnitude(&mut b);
            for row in &b {
                betas.push_str(&format!("{},{}\n", csv_field(&format!("{prefix}{}", row.feature)), row.value));
            }
            for (metric, value) in &report.metrics {
                metrics.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_field(&report.feature_set),
                    csv_field(&report.task),
                    csv_field(metric),
                    value
                ));
            }
            let name = report.name();
            if !c.is_empty() {
                let file = format!("{name}_correlations.svg");
                write(&file, &bar_chart_svg(&format!("Correlation with target: {}", report.feature_set), &c))?;
                files.push(file);
            }
            if !b.is_empty() {
                let file = format!("{name}_betas.svg");
                write(&file, &bar_chart_svg(&format!("Standardized coefficients: {}", report.feature_set), &b))?;
                files.push(file);
            }
            for (hist_name, h) in &report.histograms {
                let file = format!("{name}_{}_histogram.svg", slug(hist_name));
                write(&file, &histogram_svg(&format!("Predicted probability: {hist_name}"), h))?;
                files.push(file);
            }
        }
        for (file, content) in [("correlations.csv", corr), ("betas.csv", betas), ("metrics.csv", metrics)] {
            write(file, &content)?;
            files.push(file.to_string());
        }
        files.sort();
    }
    let manifest = Manifest { reports: reports.iter().map(InsightReport::name).collect(), files: &files };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write("manifest.json", &json)?;
    files.push("manifest.json".to_string());
    Ok(files)
}
