use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;

const MIN_ROWS: usize = 10;
const MIN_STD: f64 = 1e-12;

/// One-factor summary of a facet matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeFactor {
    /// Unit-norm leading eigenvector of the correlation matrix, sign chosen
    /// so the loadings sum to a non-negative value.
    pub loadings: Vec<f64>,
    /// Composite score per fitted row.
    pub scores: Vec<f64>,
    pub eigenvalue: f64,
    /// Leading eigenvalue over the number of columns.
    pub variance_explained: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl CompositeFactor {
    /// Score new rows with the fitted means, scales and loadings.
    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>, FeatureError> {
        if rows.ncols() != self.loadings.len() {
            return Err(FeatureError::DimensionMismatch { expected: self.loadings.len(), found: rows.ncols() });
        }
        Ok((0..rows.nrows())
            .map(|i| {
                (0..rows.ncols())
                    .map(|j| (rows[(i, j)] - self.means[j]) / self.stds[j] * self.loadings[j])
                    .sum()
            })
            .collect())
    }
}

/// Principal-axis approximation of a single-factor solution: z-score the
/// columns (population std), take the leading eigenpair of the correlation
/// matrix, and project.
pub fn composite_factor(facets: &DMatrix<f64>) -> Result<CompositeFactor, FeatureError> {
    let (n, p) = facets.shape();
    if n < MIN_ROWS {
        return Err(FeatureError::TooFewRows { found: n, min: MIN_ROWS });
    }
    if p == 0 {
        return Err(FeatureError::EmptyInput);
    }
    if facets.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite("facet matrix".into()));
    }
    let mut means = Vec::with_capacity(p);
    let mut stds = Vec::with_capacity(p);
    for (j, col) in facets.column_iter().enumerate() {
        let m = col.iter().sum::<f64>() / n as f64;
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        if s < MIN_STD {
            return Err(FeatureError::DegenerateColumn(j));
        }
        means.push(m);
        stds.push(s);
    }
    let mut z = facets.clone();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v - means[j]) / stds[j]);
    }
    let corr = z.tr_mul(&z) / n as f64;
    let eig = SymmetricEigen::new(corr);
    let lead = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > eig.eigenvalues[best] { i } else { best });
    let eigenvalue = eig.eigenvalues[lead];
    let mut loadings: Vec<f64> = eig.eigenvectors.column(lead).iter().copied().collect();
    let norm = loadings.iter().map(|v| v * v).sum::<f64>().sqrt();
    loadings.iter_mut().for_each(|v| *v /= norm);
    if loadings.iter().sum::<f64>() < 0.0 {
        loadings.iter_mut().for_each(|v| *v = -*v);
    }
    let scores: Vec<f64> =
        (0..n).map(|i| (0..p).map(|j| z[(i, j)] * loadings[j]).sum()).collect();
    Ok(CompositeFactor {
        loadings,
        scores,
        eigenvalue,
        variance_explained: eigenvalue / p as f64,
        means,
        stds,
    })
}
