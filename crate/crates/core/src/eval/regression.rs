use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{EvalError, PredictorTable};

/// Floor on the residual variance so that an exact fit still has a finite
/// log-likelihood.
pub const MIN_RESIDUAL_VARIANCE: f64 = 1e-12;

/// Relative size below which a diagonal entry of R counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZScore {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl ZScore {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

pub fn zscore_fit(name: &str, values: &[f64]) -> Result<ZScore, EvalError> {
    if values.is_empty() {
        return Err(EvalError::DegeneratePredictor(format!("{name}: no rows")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !sd.is_finite() || sd <= 0.0 {
        return Err(EvalError::DegeneratePredictor(format!(
            "{name}: zero variance on fit rows"
        )));
    }
    Ok(ZScore { mean, sd })
}

/// Fits z-score statistics on `fit_rows` only and applies them to every row.
pub fn zscore_fit_apply(
    table: &PredictorTable,
    columns: &[&str],
    fit_rows: &[usize],
) -> Result<(PredictorTable, Vec<(String, ZScore)>), EvalError> {
    let mut out = table.clone();
    let mut stats = Vec::with_capacity(columns.len());
    for &c in columns {
        let values = table.column(c)?;
        let fit: Vec<f64> = fit_rows.iter().map(|&r| values[r]).collect();
        let z = zscore_fit(c, &fit)?;
        out.set_column(c, values.iter().map(|&v| z.apply(v)).collect());
        stats.push((c.to_string(), z));
    }
    Ok((out, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub predictors: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Maximum-likelihood estimate, RSS / n, floored.
    pub residual_variance: f64,
    /// Gaussian log-likelihood of the training rows.
    pub log_likelihood: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.predictors
            .iter()
            .position(|p| p == name)
            .map(|i| self.coefficients[i])
    }
}

fn gaussian_row_ll(y: f64, mean: f64, variance: f64) -> f64 {
    let r = y - mean;
    -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - r * r / (2.0 * variance)
}

/// Ordinary least squares with an intercept, by Householder QR.
///
/// `x` holds one row per observation, one column per predictor.
pub fn ols_fit(
    predictors: &[String],
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<RegressionFit, EvalError> {
    let n = y.len();
    let p = predictors.len() + 1;
    if x.len() != n {
        return Err(EvalError::InvalidInput(format!(
            "{} design rows, {n} targets",
            x.len()
        )));
    }
    if n < p {
        return Err(EvalError::SingularDesign(format!(
            "{n} rows for {p} parameters"
        )));
    }
    let design = DMatrix::from_fn(n, p, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] });
    let qr = design.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|j| r[(j, j)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    if let Some(j) = diag
        .iter()
        .position(|d| d.is_nan() || *d <= RANK_TOLERANCE * scale)
    {
        let name = if j == 0 {
            "intercept"
        } else {
            predictors[j - 1].as_str()
        };
        return Err(EvalError::SingularDesign(format!(
            "{name} is collinear with earlier columns"
        )));
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or_else(|| EvalError::SingularDesign("triangular solve failed".into()))?;
    let mut fit = RegressionFit {
        predictors: predictors.to_vec(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        residual_variance: 0.0,
        log_likelihood: 0.0,
        n,
    };
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yy)| (yy - fit.predict(row)).powi(2))
        .sum();
    fit.residual_variance = (rss / n as f64).max(MIN_RESIDUAL_VARIANCE);
    fit.log_likelihood = gaussian_ll(&fit, x, y).iter().sum();
    Ok(fit)
}

/// Per-row Gaussian log-likelihood under the fit's residual variance.
pub fn gaussian_ll(fit: &RegressionFit, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(row, &yy)| gaussian_row_ll(yy, fit.predict(row), fit.residual_variance))
        .collect()
}

/// Design rows for `rows` of the table, columns in `formula` order.
pub fn design_rows(
    table: &PredictorTable,
    formula: &[&str],
    rows: &[usize],
) -> Result<Vec<Vec<f64>>, EvalError> {
    let cols: Vec<&[f64]> = formula
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_, _>>()?;
    Ok(rows
        .iter()
        .map(|&r| cols.iter().map(|c| c[r]).collect())
        .collect())
}

/// Fits `rt_target ~ formula` on the given rows of the table.
pub fn ols_fit_table(
    table: &PredictorTable,
    formula: &[&str],
    rows: &[usize],
) -> Result<RegressionFit, EvalError> {
    let x = design_rows(table, formula, rows)?;
    let y: Vec<f64> = rows.iter().map(|&r| table.rt_target[r]).collect();
    ols_fit(
        &formula.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        &x,
        &y,
    )
}
