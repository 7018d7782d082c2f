use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::FeatureMatrix;
use super::linear::fit_linear;
use crate::error::{Error, Result};
use crate::eval::mape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepwiseConfig {
    pub max_features: usize,
    /// Share of rows held out for scoring.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            max_features: 4,
            validation_fraction: 0.2,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseResult {
    /// Picked names, in pick order.
    pub selected: Vec<String>,
    /// Validation MAPE (%) after each pick.
    pub scores: Vec<f64>,
    /// Validation MAPE of the intercept-only model.
    pub baseline: f64,
    /// Candidates skipped because they are constant.
    pub constant: Vec<String>,
}

/// Greedy forward selection scored by validation-fold MAPE of a refit linear model.
///
/// Rows are shuffled with `seed` and the first `validation_fraction` of them
/// are held out. Each round tries every remaining candidate in name order and
/// keeps the first one with the lowest score; selection stops at
/// `max_features` or when no candidate lowers the score.
pub fn forward_stepwise(candidates: &FeatureMatrix, targets: &[f64], cfg: &StepwiseConfig) -> Result<StepwiseResult> {
    if candidates.exprs.is_empty() {
        return Err(Error::Fit("no candidate features".into()));
    }
    let n = candidates.rows();
    if targets.len() != n {
        return Err(Error::Fit(format!("{} targets for {n} rows", targets.len())));
    }
    if let Some(bad) = targets.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::Fit(format!("targets must be positive for MAPE, found {bad}")));
    }
    if !(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0) {
        return Err(Error::Fit("validation_fraction must lie in (0, 1)".into()));
    }

    let mut pool: Vec<(String, &[f64])> = Vec::new();
    let mut constant = Vec::new();
    for (expr, col) in candidates.exprs.iter().zip(&candidates.columns) {
        let name = expr.to_string();
        if col.iter().all(|v| *v == col[0]) {
            constant.push(name);
        } else {
            pool.push((name, col.as_slice()));
        }
    }
    if pool.is_empty() {
        return Err(Error::Fit("all candidate features are constant".into()));
    }
    pool.sort_by(|a, b| a.0.cmp(&b.0));

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_rows, train_rows) = order.split_at(n_val);
    let pick = |col: &[f64], rows: &[usize]| -> Vec<f64> { rows.iter().map(|&i| col[i]).collect() };
    let train_y = pick(targets, train_rows);
    let val_y = pick(targets, val_rows);
    let train_cols: Vec<Vec<f64>> = pool.iter().map(|(_, c)| pick(c, train_rows)).collect();
    let val_cols: Vec<Vec<f64>> = pool.iter().map(|(_, c)| pick(c, val_rows)).collect();

    let score = |chosen: &[usize]| -> Result<f64> {
        let names: Vec<String> = chosen.iter().map(|&j| pool[j].0.clone()).collect();
        let cols: Vec<&[f64]> = chosen.iter().map(|&j| train_cols[j].as_slice()).collect();
        let model = fit_linear(&names, &cols, &train_y)?;
        let pred: Vec<f64> = (0..val_y.len())
            .map(|i| model.intercept + chosen.iter().zip(&model.weights).map(|(&j, w)| w * val_cols[j][i]).sum::<f64>())
            .collect();
        mape(&pred, &val_y)
    };

    let baseline = score(&[])?;
    let mut current = baseline;
    let mut chosen: Vec<usize> = Vec::new();
    let mut scores = Vec::new();
    while chosen.len() < cfg.max_features && chosen.len() < pool.len() {
        if train_y.len() < chosen.len() + 2 {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..pool.len() {
            if chosen.contains(&j) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(j);
            let s = score(&trial)?;
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, j));
            }
        }
        match best {
            Some((s, j)) if s < current => {
                chosen.push(j);
                scores.push(s);
                current = s;
            }
            _ => break,
        }
    }
    Ok(StepwiseResult {
        selected: chosen.iter().map(|&j| pool[j].0.clone()).collect(),
        scores,
        baseline,
        constant,
    })
}
