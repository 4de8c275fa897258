//! Error models: least squares with Gaussian predictive quantiles, and
//! pinball-loss quantile regression.

mod ols;
mod quantile;

pub use ols::{fit_ols, predict_ols_quantile, LinearFit};
pub use quantile::{fit_quantile, fit_quantiles, QuantileFit, QuantileSolution};

use crate::error::{Error, Result};

/// Design matrix (row-major, intercept column included by the caller) and
/// response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    design: Vec<f64>,
    n_cols: usize,
    response: Vec<f64>,
}

impl RegressionDataset {
    /// `design` holds `response.len()` rows of `n_cols` values each.
    pub fn new(design: Vec<f64>, n_cols: usize, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if n_cols == 0 || design.len() != n * n_cols {
            return Err(Error::invalid(format!(
                "design has {} values, expected {} rows x {} columns",
                design.len(),
                n,
                n_cols
            )));
        }
        if n <= n_cols {
            return Err(Error::invalid(format!(
                "need more observations ({n}) than coefficients ({n_cols})"
            )));
        }
        if design.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression dataset"));
        }
        Ok(RegressionDataset {
            design,
            n_cols,
            response,
        })
    }

    /// Builds `[1, x_1, ..., x_q]` rows from predictor columns.
    pub fn with_intercept(predictors: &[&[f64]], response: &[f64]) -> Result<Self> {
        let n = response.len();
        if predictors.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("predictor and response lengths differ"));
        }
        let k = predictors.len() + 1;
        let mut design = Vec::with_capacity(n * k);
        for i in 0..n {
            design.push(1.0);
            design.extend(predictors.iter().map(|c| c[i]));
        }
        RegressionDataset::new(design, k, response.to_vec())
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    /// `x_i . beta` for every row.
    pub fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| dot(self.row(i), beta)).collect()
    }

    /// Average pinball loss of coefficient vector `beta` at probability `p`.
    pub fn average_pinball_loss(&self, beta: &[f64], p: f64) -> f64 {
        let total = crate::stats::compensated_sum(
            (0..self.n_rows()).map(|i| pinball_loss(p, self.response[i], dot(self.row(i), beta))),
        );
        total / self.n_rows() as f64
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quantile (pinball) loss: `p (y - yhat)` when `y >= yhat`, otherwise
/// `(1 - p)(yhat - y)`.
pub fn pinball_loss(p: f64, y: f64, yhat: f64) -> f64 {
    let u = y - yhat;
    if u >= 0.0 {
        p * u
    } else {
        (p - 1.0) * u
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")))
    }
}
