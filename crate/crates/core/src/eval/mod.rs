//! Error metrics, path-delay assembly and model benchmarks.

mod benchmark;
mod path;
mod report;

use crate::dataset::{Dataset, Role};
use crate::error::{Error, Result};

pub use benchmark::{benchmark, featurize_samples, Benchmark, EvalReport, EvalRow};
pub use path::{link_delays, predict_path_delay, predict_path_delays};
pub use report::{plot_points, write_plot_csv, PlotPoint, REPORT_HEADERS};

fn check_lengths(y_hat: &[f64], y: &[f64]) -> Result<()> {
    if y_hat.len() != y.len() {
        return Err(Error::invalid(format!(
            "prediction and target lengths differ ({} vs {})",
            y_hat.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent. Zero targets are an error.
pub fn mape(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(y_hat, y)?;
    if let Some(i) = y.iter().position(|v| *v == 0.0) {
        return Err(Error::invalid(format!(
            "MAPE is undefined for the zero target at index {i}; filter zero labels first"
        )));
    }
    let sum: f64 = y_hat.iter().zip(y).map(|(p, t)| ((p - t) / t).abs()).sum();
    Ok(100.0 * sum / y.len() as f64)
}

/// Mean squared error.
pub fn mse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(y_hat, y)?;
    Ok(y_hat.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64)
}

/// Demote sample links whose occupancy label is exactly zero to context links,
/// so that paths crossing them still resolve. Returns the number demoted.
pub fn filter_zero_targets(dataset: &Dataset) -> (Dataset, usize) {
    let mut out = dataset.clone();
    let mut dropped = 0;
    for link in &mut out.links {
        if link.role == Role::Sample && link.observed_occupancy == 0.0 {
            link.role = Role::Context;
            dropped += 1;
        }
    }
    (out, dropped)
}
