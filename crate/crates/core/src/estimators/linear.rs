use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// `y = intercept + sum_i weights[i] * x_i` over named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Set when the centered design was rank deficient; the weights are then
    /// the minimum-norm least-squares solution.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl LinearModel {
    /// Weights plus intercept.
    pub fn parameter_count(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::FeatureMismatch {
                expected: self.feature_names.clone(),
                found: vec![format!("{} values", x.len())],
            });
        }
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Least-squares fit of `y` on the given columns plus an intercept.
///
/// Columns and target are centered first, so the intercept is recovered
/// exactly and only the slopes go through the rank-revealing solve.
pub fn fit_linear(feature_names: &[String], columns: &[&[f64]], y: &[f64]) -> Result<LinearModel> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Fit("empty data".into()));
    }
    if feature_names.len() != columns.len() {
        return Err(Error::Fit(format!(
            "{} names for {} columns",
            feature_names.len(),
            columns.len()
        )));
    }
    if n < columns.len() + 1 {
        return Err(Error::Fit(format!(
            "need at least {} rows for {} features, got {n}",
            columns.len() + 1,
            columns.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || columns.iter().any(|c| c.len() != n || c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Fit("non-finite entry or ragged column".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let y_mean = mean(y);
    if columns.is_empty() {
        return Ok(LinearModel {
            feature_names: Vec::new(),
            weights: Vec::new(),
            intercept: y_mean,
            rank_deficient: false,
        });
    }
    let x_means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .zip(&x_means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let refs: Vec<&[f64]> = centered.iter().map(Vec::as_slice).collect();

    // an all-zero design (every column constant) has nothing to solve
    let (weights, rank) = if centered.iter().all(|c| c.iter().all(|v| *v == 0.0)) {
        (vec![0.0; columns.len()], 0)
    } else {
        let sol = lstsq(&refs, &yc)?;
        (sol.coef, sol.rank)
    };
    let intercept = y_mean - weights.iter().zip(&x_means).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        feature_names: feature_names.to_vec(),
        weights,
        intercept,
        rank_deficient: rank < columns.len(),
    })
}
