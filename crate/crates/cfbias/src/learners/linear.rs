//! Closed-form and iterative linear base regressors: ridge by the normal
//! equations, lasso by coordinate descent, and a Newton-iterated logistic
//! regression used for propensity estimation.

use crate::error::{Error, Result};
use crate::numerics::{cholesky_solve, mean, sigmoid, Matrix};

/// Fitted linear regression in the space of its training inputs.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.times_vec(&self.weights)
            .into_iter()
            .map(|v| v + self.intercept)
            .collect()
    }
}

/// Ridge weights without intercept or centering: solves
/// `(XᵀX + lambda I) w = Xᵀ y` directly. Callers are responsible for any
/// centering of the system.
pub fn fit_ridge_raw(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch(
            "design rows and target length differ".into(),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::DegenerateInput("empty design".into()));
    }
    let mut gram = x.gram();
    for j in 0..gram.cols() {
        gram.set(j, j, gram.get(j, j) + lambda);
    }
    cholesky_solve(&gram, &x.t_times_vec(y))
}

/// Ridge regression `min ||y - Xw - b||^2 + lambda ||w||^2` with an
/// unpenalized intercept, via centering plus the normal equations.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch(
            "design rows and target length differ".into(),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::DegenerateInput("empty design".into()));
    }
    let col_means = x.col_means();
    let y_mean = mean(y);

    let mut xc = x.clone();
    for i in 0..xc.rows() {
        for j in 0..xc.cols() {
            xc.set(i, j, xc.get(i, j) - col_means[j]);
        }
    }
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let weights = fit_ridge_raw(&xc, &yc, lambda)?;
    let intercept = y_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

/// Ordinary least squares (ridge with zero penalty).
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    fit_ridge(x, y, 0.0)
}

pub const LASSO_MAX_SWEEPS: usize = 10_000;
pub const LASSO_TOL: f64 = 1e-8;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso `min (1/2n)||y - Xw - b||^2 + lambda ||w||_1` by cyclic coordinate
/// descent. Columns are standardized internally; the returned model is in
/// the original input space.
pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_lasso_with(x, y, lambda, LASSO_MAX_SWEEPS, LASSO_TOL)
}

/// [`fit_lasso`] with explicit sweep budget and convergence tolerance.
pub fn fit_lasso_with(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    max_sweeps: usize,
    tol: f64,
) -> Result<LinearModel> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch(
            "design rows and target length differ".into(),
        ));
    }
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::DegenerateInput("empty design".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lasso penalty must be >= 0".into()));
    }

    let col_means = x.col_means();
    let col_sds = x.col_stds();
    let active: Vec<bool> = col_sds.iter().map(|&s| s > 0.0).collect();

    // standardized columns, column-major for fast coordinate sweeps
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let sd = if active[j] { col_sds[j] } else { 1.0 };
        cols.push(
            (0..n)
                .map(|i| (x.get(i, j) - col_means[j]) / sd)
                .collect(),
        );
    }
    let y_mean = mean(y);
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let nf = n as f64;
    let mut w = vec![0.0; d];
    let mut converged = false;
    let mut sweeps = 0;
    let mut last_delta = f64::INFINITY;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if !active[j] {
                continue;
            }
            let col = &cols[j];
            // rho = (1/n) x_j . (r + x_j w_j); unit column variance
            let dot: f64 = col.iter().zip(&residual).map(|(a, b)| a * b).sum();
            let rho = dot / nf + w[j];
            let w_new = soft_threshold(rho, lambda);
            let delta = w_new - w[j];
            if delta != 0.0 {
                for (r, &c) in residual.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                w[j] = w_new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        last_delta = max_delta;
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { sweeps, last_delta });
    }

    // back to the original column scale
    let weights: Vec<f64> = (0..d)
        .map(|j| if active[j] { w[j] / col_sds[j] } else { 0.0 })
        .collect();
    let intercept = y_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(wj, m)| wj * m)
            .sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

/// Fitted logistic regression; predicts P(label = 1 | x).
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.times_vec(&self.weights)
            .into_iter()
            .map(|v| sigmoid(v + self.intercept))
            .collect()
    }
}

/// Logistic regression by Newton iterations with a small ridge term for
/// stability on separable data.
pub fn fit_logistic(x: &Matrix, labels: &[u8], l2: f64, max_iter: usize) -> Result<LogisticModel> {
    if x.rows() != labels.len() {
        return Err(Error::DimensionMismatch(
            "design rows and label length differ".into(),
        ));
    }
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::DegenerateInput("empty design".into()));
    }

    // design with intercept column appended
    let ones = vec![1.0; n];
    let xd = x.with_column(&ones);
    let p_dim = d + 1;
    let mut beta = vec![0.0; p_dim];

    for _ in 0..max_iter {
        let eta = xd.times_vec(&beta);
        let probs: Vec<f64> = eta.iter().map(|&v| sigmoid(v)).collect();

        let mut grad = vec![0.0; p_dim];
        for i in 0..n {
            let err = probs[i] - labels[i] as f64;
            for (g, &v) in grad.iter_mut().zip(xd.row(i)) {
                *g += err * v;
            }
        }
        for j in 0..d {
            grad[j] += l2 * beta[j]; // intercept unpenalized
        }

        let mut hess = Matrix::zeros(p_dim, p_dim);
        for i in 0..n {
            let wgt = (probs[i] * (1.0 - probs[i])).max(1e-10);
            let row = xd.row(i);
            for j in 0..p_dim {
                let rj = wgt * row[j];
                for k in j..p_dim {
                    hess.set(j, k, hess.get(j, k) + rj * row[k]);
                }
            }
        }
        for j in 0..p_dim {
            for k in 0..j {
                let v = hess.get(k, j);
                hess.set(j, k, v);
            }
            let ridge = if j < d { l2.max(1e-10) } else { 1e-10 };
            hess.set(j, j, hess.get(j, j) + ridge);
        }

        let step = cholesky_solve(&hess, &grad)?;
        let step_norm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (b, s) in beta.iter_mut().zip(&step) {
            *b -= s;
        }
        if step_norm < 1e-10 {
            break;
        }
    }

    let intercept = beta[p_dim - 1];
    beta.truncate(d);
    Ok(LogisticModel {
        weights: beta,
        intercept,
    })
}
