use std::path::Path;

use serde::Serialize;

use super::featurize_samples;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::OccupancyModel;

/// Column names of [`super::EvalReport::to_csv`].
pub const REPORT_HEADERS: [&str; 16] = [
    "model",
    "features",
    "params",
    "params_without_intercept",
    "test_mape_pct",
    "test_mse",
    "path_mape_pct",
    "path_mse",
    "fit_s",
    "inference_s",
    "path_inference_s",
    "train_samples",
    "test_samples",
    "test_paths",
    "converged",
    "error",
];

/// One `(rho_e, observed, predicted)` triple for scatter plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub model: String,
    pub rho_e: f64,
    pub observed: f64,
    pub predicted: f64,
}

/// Predictions of every fitted model on the sample links of `test`.
pub fn plot_points(models: &[(String, Option<OccupancyModel>)], test: &Dataset) -> Result<Vec<PlotPoint>> {
    let (x, y) = featurize_samples(test)?;
    let mut out = Vec::new();
    for (name, model) in models {
        let Some(model) = model else { continue };
        let pred = model.predict_batch(&x)?;
        out.extend(x.iter().zip(&y).zip(pred).map(|((f, obs), p)| PlotPoint {
            model: name.clone(),
            rho_e: f.rho_e,
            observed: *obs,
            predicted: p,
        }));
    }
    Ok(out)
}

pub fn write_plot_csv(points: &[PlotPoint], file: impl AsRef<Path>) -> Result<()> {
    let file = file.as_ref();
    let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", file.display()));
    let mut wtr = csv::Writer::from_path(file).map_err(wrap)?;
    if points.is_empty() {
        wtr.write_record(["model", "rho_e", "observed", "predicted"]).map_err(wrap)?;
    }
    for p in points {
        wtr.serialize(p).map_err(wrap)?;
    }
    wtr.flush().map_err(|e| Error::io(file, e))
}
