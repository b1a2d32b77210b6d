use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_fit_inputs, FittedLinearModel, LearnerError, ModelKind, Standardizer};

/// Relative eigenvalue floor below which an unpenalized Gram matrix is singular.
const RANK_TOL: f64 = 1e-12;

/// Closed-form ridge regression.
///
/// Minimizes `‖y − Zw − b‖² + λ‖w‖²` where `Z` is `x` standardized with a
/// freshly fitted [`Standardizer`]. The intercept is `mean(y)` and
/// `w = (ZᵀZ + λI)⁻¹ Zᵀ(y − ȳ)`, solved by Cholesky.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: f64,
    column_names: &[String],
) -> Result<FittedLinearModel, LearnerError> {
    check_fit_inputs(x, y, penalty)?;
    if column_names.len() != x.ncols() {
        return Err(LearnerError::ColumnMismatch { expected: x.ncols(), found: column_names.len() });
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.apply(x)?;
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));

    let p = z.ncols();
    let mut gram = z.tr_mul(&z);
    for j in 0..p {
        gram[(j, j)] += penalty;
    }
    let rhs = z.tr_mul(&yc);

    if penalty == 0.0 && p > 0 {
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let max = eig.iter().cloned().fold(0.0f64, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || min <= RANK_TOL * max {
            return Err(LearnerError::SingularSystem(penalty));
        }
    }
    let weights = match gram.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => return Err(LearnerError::SingularSystem(penalty)),
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(LearnerError::SingularSystem(penalty));
    }

    Ok(FittedLinearModel {
        kind: ModelKind::Ridge,
        column_names: column_names.to_vec(),
        weights: weights.iter().copied().collect(),
        intercept: y_mean,
        penalty,
        standardizer,
        converged: true,
        iterations: 0,
    })
}
