use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LearnerError;

/// Columns whose population standard deviation falls below this are left unscaled.
pub const MIN_STD: f64 = 1e-12;

/// Per-column z-scoring with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self, LearnerError> {
        let n = x.nrows();
        if n < 2 {
            return Err(LearnerError::EmptyMatrix(n));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std < MIN_STD { 1.0 } else { std });
        }
        Ok(Standardizer { means, stds })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, LearnerError> {
        if x.ncols() != self.means.len() {
            return Err(LearnerError::ColumnMismatch { expected: self.means.len(), found: x.ncols() });
        }
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(z)
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_z_scores() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let st = Standardizer::fit(&x).unwrap();
        let z = st.apply(&x).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[(0, 0)] + expected).abs() < 1e-12);
        assert!(z[(1, 0)].abs() < 1e-12);
        assert!((z[(2, 0)] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = DMatrix::from_column_slice(4, 2, &[7.0, 7.0, 7.0, 7.0, 1.0, 2.0, 3.0, 5.0]);
        let st = Standardizer::fit(&x).unwrap();
        assert_eq!(st.stds[0], 1.0);
        let z = st.apply(&x).unwrap();
        assert!(z.column(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn refit_after_apply_is_identity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 4.0, 20.0, 8.0, -5.0]);
        let st = Standardizer::fit(&x).unwrap();
        let z = st.apply(&x).unwrap();
        let again = Standardizer::fit(&z).unwrap();
        for (m, s) in again.means.iter().zip(&again.stds) {
            assert!(m.abs() < 1e-10);
            assert!((s - 1.0).abs() < 1e-10);
        }
        // applying twice is not the same as once
        let zz = st.apply(&z).unwrap();
        assert!((zz - z).abs().max() > 1e-3);
    }

    #[test]
    fn requires_two_rows() {
        assert_eq!(Standardizer::fit(&DMatrix::zeros(1, 3)), Err(LearnerError::EmptyMatrix(1)));
    }
}
