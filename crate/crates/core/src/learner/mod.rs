//! Interpretable linear models over standardized features.
//!
//! Both models use the un-normalized penalty `λ‖w‖²` (no `1/n` factor) and
//! leave the intercept unpenalized. Weights live in standardized feature
//! space so their magnitudes are comparable across columns.

mod logistic;
mod ridge;
mod standardize;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logistic::{fit_logistic, fit_logistic_traced, logistic_gradient, logistic_objective, LogisticOptions};
pub use ridge::fit_ridge;
pub use standardize::Standardizer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("matrix has {0} rows; at least 2 are required")]
    EmptyMatrix(usize),
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidPenalty(f64),
    #[error("normal equations are singular at penalty {0}")]
    SingularSystem(f64),
    #[error("targets contain a single class")]
    SingleClass,
    #[error("targets must be 0 or 1, found {0}")]
    NonBinaryTarget(f64),
    #[error("expected {expected} columns, found {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Logistic,
}

/// A fitted ridge or logistic model. `weights` are in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLinearModel {
    pub kind: ModelKind,
    pub column_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: f64,
    pub standardizer: Standardizer,
    /// Always true for ridge; for logistic, whether the gradient tolerance was met.
    pub converged: bool,
    pub iterations: usize,
}

impl FittedLinearModel {
    /// Linear predictor `standardize(x)·w + b` per row.
    pub fn decision_function(&self, x: &DMatrix<f64>) -> Result<Vec<f64>, LearnerError> {
        if x.ncols() != self.weights.len() {
            return Err(LearnerError::ColumnMismatch { expected: self.weights.len(), found: x.ncols() });
        }
        let z = self.standardizer.apply(x)?;
        Ok((0..z.nrows())
            .map(|i| {
                let row = z.row(i);
                row.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.intercept
            })
            .collect())
    }

    /// Ridge: fitted values. Logistic: probabilities of the positive class.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>, LearnerError> {
        let eta = self.decision_function(x)?;
        Ok(match self.kind {
            ModelKind::Ridge => eta,
            // Keep probabilities strictly inside (0, 1) even when the linear predictor saturates.
            ModelKind::Logistic => {
                eta.into_iter().map(|t| sigmoid(t).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)).collect()
            }
        })
    }

    /// Coefficients and intercept in the original feature units.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let coef: Vec<f64> =
            self.weights.iter().zip(&self.standardizer.stds).map(|(w, s)| w / s).collect();
        let shift: f64 = coef.iter().zip(&self.standardizer.means).map(|(c, m)| c * m).sum();
        (coef, self.intercept - shift)
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_fit_inputs(x: &DMatrix<f64>, y: &[f64], penalty: f64) -> Result<(), LearnerError> {
    if x.nrows() != y.len() {
        return Err(LearnerError::LengthMismatch { rows: x.nrows(), targets: y.len() });
    }
    if x.nrows() < 2 {
        return Err(LearnerError::EmptyMatrix(x.nrows()));
    }
    if !penalty.is_finite() || penalty < 0.0 {
        return Err(LearnerError::InvalidPenalty(penalty));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFiniteInput);
    }
    Ok(())
}
