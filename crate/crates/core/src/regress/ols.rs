use nalgebra::{DMatrix, DVector};

use super::{check_probability, dot, RegressionDataset};
use crate::error::{Error, Result};
use crate::stats::standard_normal_quantile;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// Residual standard deviation `sqrt(SSE / (n - k))`.
    pub sigma: f64,
}

/// Least-squares fit through a Householder QR factorisation.
pub fn fit_ols(data: &RegressionDataset) -> Result<LinearFit> {
    let n = data.n_rows();
    let k = data.n_cols();
    let a = DMatrix::from_row_slice(n, k, data.design());
    let b = DVector::from_column_slice(data.response());

    let col_norm = (0..k).map(|j| a.column(j).norm()).fold(0.0_f64, f64::max);
    let qr = a.qr();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)].abs() <= 1e-10 * col_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!(
                "column {j} is (nearly) a linear combination of the preceding columns, \
                 e.g. a constant predictor alongside the intercept"
            )));
        }
    }
    let qtb = qr.q().transpose() * &b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();

    let sse = crate::stats::compensated_sum((0..n).map(|i| {
        let e = data.response()[i] - dot(data.row(i), &coefficients);
        e * e
    }));
    let sigma = (sse / (n - k) as f64).sqrt();
    if !sigma.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("least-squares fit"));
    }
    Ok(LinearFit { coefficients, sigma })
}

/// `x . beta + sigma z_p`, the `p` quantile under i.i.d. Gaussian errors.
pub fn predict_ols_quantile(fit: &LinearFit, x: &[f64], p: f64) -> Result<f64> {
    check_probability(p)?;
    if x.len() != fit.coefficients.len() {
        return Err(Error::invalid(format!(
            "predictor row has {} values, fit has {} coefficients",
            x.len(),
            fit.coefficients.len()
        )));
    }
    let mean = dot(x, &fit.coefficients);
    if fit.sigma == 0.0 {
        return Ok(mean);
    }
    Ok(mean + fit.sigma * standard_normal_quantile(p))
}
