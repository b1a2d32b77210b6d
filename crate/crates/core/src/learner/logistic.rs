use nalgebra::{DMatrix, DVector};

use super::{check_fit_inputs, sigmoid, FittedLinearModel, LearnerError, ModelKind, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Stop once the max-norm of the gradient is at or below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { tol: 1e-8, max_iter: 10_000 }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `Σ log(1 + exp(−ỹ(z·w + b))) + λ‖w‖²` with `ỹ = 2y − 1`.
pub fn logistic_objective(z: &DMatrix<f64>, y: &[f64], weights: &[f64], intercept: f64, penalty: f64) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let eta = row_dot(z, i, weights) + intercept;
        let sign = if yi > 0.5 { 1.0 } else { -1.0 };
        total += softplus(-sign * eta);
    }
    total + penalty * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_objective`]; the last entry is the intercept component.
pub fn logistic_gradient(z: &DMatrix<f64>, y: &[f64], weights: &[f64], intercept: f64, penalty: f64) -> Vec<f64> {
    let p = weights.len();
    let mut g = vec![0.0; p + 1];
    for (i, &yi) in y.iter().enumerate() {
        let r = sigmoid(row_dot(z, i, weights) + intercept) - yi;
        for j in 0..p {
            g[j] += r * z[(i, j)];
        }
        g[p] += r;
    }
    for j in 0..p {
        g[j] += 2.0 * penalty * weights[j];
    }
    g
}

fn row_dot(z: &DMatrix<f64>, i: usize, w: &[f64]) -> f64 {
    w.iter().enumerate().map(|(j, wj)| z[(i, j)] * wj).sum()
}

fn hessian(z: &DMatrix<f64>, weights: &[f64], intercept: f64, penalty: f64) -> DMatrix<f64> {
    let p = weights.len();
    let mut h = DMatrix::zeros(p + 1, p + 1);
    for i in 0..z.nrows() {
        let s = sigmoid(row_dot(z, i, weights) + intercept);
        let d = s * (1.0 - s);
        for a in 0..=p {
            let za = if a < p { z[(i, a)] } else { 1.0 };
            for b in a..=p {
                let zb = if b < p { z[(i, b)] } else { 1.0 };
                h[(a, b)] += d * za * zb;
            }
        }
    }
    for j in 0..p {
        h[(j, j)] += 2.0 * penalty;
    }
    h.fill_lower_triangle_with_upper_triangle();
    h
}

/// Damped Newton step: solve `(H + μI) d = −g`, raising μ until the
/// factorization succeeds.
fn newton_direction(h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut mu = 0.0;
    loop {
        let mut damped = h.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += mu;
        }
        if let Some(ch) = damped.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return d.iter().copied().collect();
            }
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { mu * 10.0 };
        if mu > 1e12 * scale {
            return rhs.iter().copied().collect();
        }
    }
}

/// L2-regularized logistic regression. Returns the model and the objective
/// value at every accepted iterate (starting from the zero initialization).
pub fn fit_logistic_traced(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: f64,
    column_names: &[String],
    options: LogisticOptions,
) -> Result<(FittedLinearModel, Vec<f64>), LearnerError> {
    check_fit_inputs(x, y, penalty)?;
    if column_names.len() != x.ncols() {
        return Err(LearnerError::ColumnMismatch { expected: x.ncols(), found: column_names.len() });
    }
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(LearnerError::NonBinaryTarget(*bad));
    }
    let positives = y.iter().filter(|v| **v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(LearnerError::SingleClass);
    }

    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.apply(x)?;
    let p = z.ncols();
    let mut theta = vec![0.0; p + 1];
    let objective = |t: &[f64]| logistic_objective(&z, y, &t[..p], t[p], penalty);

    let mut current = objective(&theta);
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let g = logistic_gradient(&z, y, &theta[..p], theta[p], penalty);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= options.tol {
            converged = true;
            break;
        }
        let h = hessian(&z, &theta[..p], theta[p], penalty);
        let mut accepted = None;
        for dir in [newton_direction(&h, &g), g.iter().map(|v| -v).collect()] {
            let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            if slope >= 0.0 {
                continue;
            }
            let mut step = 1.0;
            while step > 1e-16 {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
                let value = objective(&cand);
                if value <= current + 1e-4 * step * slope && value < current {
                    accepted = Some((cand, value));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        iterations += 1;
        match accepted {
            Some((cand, value)) => {
                theta = cand;
                current = value;
                trace.push(value);
            }
            // No descent is representable any more. Accept the point if the
            // Newton decrement is below what the objective can resolve.
            None => {
                let g = logistic_gradient(&z, y, &theta[..p], theta[p], penalty);
                let h = hessian(&z, &theta[..p], theta[p], penalty);
                let decrement: f64 = -newton_direction(&h, &g).iter().zip(&g).map(|(d, gi)| d * gi).sum::<f64>();
                converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= options.tol
                    || decrement.abs() <= 1e-10 * (1.0 + current.abs());
                break;
            }
        }
    }

    let model = FittedLinearModel {
        kind: ModelKind::Logistic,
        column_names: column_names.to_vec(),
        weights: theta[..p].to_vec(),
        intercept: theta[p],
        penalty,
        standardizer,
        converged,
        iterations,
    };
    Ok((model, trace))
}

pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: f64,
    column_names: &[String],
) -> Result<FittedLinearModel, LearnerError> {
    fit_logistic_traced(x, y, penalty, column_names, LogisticOptions::default()).map(|(m, _)| m)
}
