use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

pub const MAX_DEGREE: u32 = 12;

/// `y = exp(p(x))` with `p(x) = sum_i coefficients[i] * x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpPolyModel {
    pub degree: u32,
    pub coefficients: Vec<f64>,
}

impl ExpPolyModel {
    pub fn parameter_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: f64) -> f64 {
        // Horner
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c).exp()
    }
}

/// Least-squares polynomial fit of `ln y` on `x`.
pub fn fit_exp_poly(x: &[f64], y: &[f64], degree: u32) -> Result<ExpPolyModel> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::Fit(format!("degree must lie in 1..={MAX_DEGREE}, got {degree}")));
    }
    if x.len() != y.len() {
        return Err(Error::Fit("input and target lengths differ".into()));
    }
    if x.len() < degree as usize + 1 {
        return Err(Error::Fit(format!(
            "need at least {} samples for degree {degree}",
            degree + 1
        )));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Fit(format!(
            "exp-poly needs strictly positive targets, found {bad}; drop zero-occupancy rows first"
        )));
    }
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; x.len()]];
    for d in 1..=degree as usize {
        let next = columns[d - 1].iter().zip(x).map(|(p, v)| p * v).collect();
        columns.push(next);
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let sol = lstsq(&refs, &log_y)?;
    Ok(ExpPolyModel {
        degree,
        coefficients: sol.coef,
    })
}
