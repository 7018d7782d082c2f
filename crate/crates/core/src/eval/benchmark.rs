use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use super::{mape, mse, predict_path_delays};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{ModelSpec, OccupancyModel};
use crate::queue::{featurize, QueueFeatures};

/// One model's line in a benchmark report. Metric columns are `None` when the
/// model failed or the test split has no flows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub model: String,
    pub features: String,
    pub params: Option<usize>,
    /// Linear models without their intercept; equal to `params` otherwise.
    pub params_without_intercept: Option<usize>,
    pub test_mape_pct: Option<f64>,
    pub test_mse: Option<f64>,
    pub path_mape_pct: Option<f64>,
    pub path_mse: Option<f64>,
    pub fit_s: f64,
    pub inference_s: f64,
    pub path_inference_s: Option<f64>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub test_paths: usize,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

impl EvalRow {
    /// The row with its timing columns zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> EvalRow {
        EvalRow {
            fit_s: 0.0,
            inference_s: 0.0,
            path_inference_s: self.path_inference_s.map(|_| 0.0),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Sorted by test MAPE; failed models last.
    pub rows: Vec<EvalRow>,
}

pub struct Benchmark {
    pub report: EvalReport,
    /// Fitted models in input order (`None` for failures), with their spec strings.
    pub models: Vec<(String, Option<OccupancyModel>)>,
}

/// Featurize the sample links of `dataset`, returning features and occupancy labels.
pub fn featurize_samples(dataset: &Dataset) -> Result<(Vec<QueueFeatures>, Vec<f64>)> {
    dataset
        .samples()
        .map(|l| {
            let f = featurize(&l.traffic()).map_err(|e| Error::invalid(format!("link {:?}: {e}", l.link_id)))?;
            Ok((f, l.observed_occupancy))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

struct Split<'a> {
    train: (Vec<QueueFeatures>, Vec<f64>),
    test: (Vec<QueueFeatures>, Vec<f64>),
    test_set: &'a Dataset,
}

fn run_one(spec: &ModelSpec, split: &Split) -> (EvalRow, Option<OccupancyModel>) {
    let (train_x, train_y) = &split.train;
    let (test_x, test_y) = &split.test;
    let mut row = empty_row(spec, split);
    let start = Instant::now();
    let fitted = spec.fit(train_x, train_y);
    row.fit_s = start.elapsed().as_secs_f64();
    let (model, report) = match fitted {
        Ok(v) => v,
        Err(e) => {
            row.error = Some(format!("fit: {e}"));
            return (row, None);
        }
    };
    row.features = model.input_features().join(";");
    row.params = Some(model.parameter_count());
    row.params_without_intercept = Some(model.parameter_count_without_intercept());
    row.converged = report.converged;

    let start = Instant::now();
    let predicted = model.predict_batch(test_x);
    row.inference_s = start.elapsed().as_secs_f64();
    let occupancy = predicted.and_then(|p| Ok((mape(&p, test_y)?, mse(&p, test_y)?)));
    match occupancy {
        Ok((m, s)) => {
            row.test_mape_pct = Some(m);
            row.test_mse = Some(s);
        }
        Err(e) => {
            row.error = Some(format!("predict: {e}"));
            return (row, Some(model));
        }
    }

    if !split.test_set.paths.is_empty() {
        let start = Instant::now();
        let delays = predict_path_delays(&model, split.test_set);
        row.path_inference_s = Some(start.elapsed().as_secs_f64());
        let observed: Vec<f64> = split.test_set.paths.iter().map(|p| p.observed_end_to_end_delay).collect();
        match delays.and_then(|d| Ok((mape(&d, &observed)?, mse(&d, &observed)?))) {
            Ok((m, s)) => {
                row.path_mape_pct = Some(m);
                row.path_mse = Some(s);
            }
            Err(e) => row.error = Some(format!("path delay: {e}")),
        }
    }
    (row, Some(model))
}

fn order(a: &EvalRow, b: &EvalRow) -> Ordering {
    match (a.test_mape_pct, b.test_mape_pct) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.model.cmp(&b.model))
}

/// Fit every spec on `train` and score it on `test`.
///
/// Each fit runs on its own thread; at most `threads` (default 1) run at once.
/// A failing model yields a row with `error` set instead of aborting.
pub fn benchmark(specs: &[ModelSpec], train: &Dataset, test: &Dataset, threads: Option<usize>) -> Result<Benchmark> {
    if specs.is_empty() {
        return Err(Error::invalid("no models to benchmark"));
    }
    let split = Split {
        train: featurize_samples(train)?,
        test: featurize_samples(test)?,
        test_set: test,
    };
    if split.train.0.is_empty() || split.test.0.is_empty() {
        return Err(Error::invalid("train and test splits must both contain samples"));
    }
    for (name, y) in [("train", &split.train.1), ("test", &split.test.1)] {
        if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::invalid(format!(
                "{name} split has a nonpositive occupancy label ({bad}); filter zero labels first"
            )));
        }
    }

    let width = threads.unwrap_or(1).max(1);
    let mut results: Vec<(EvalRow, Option<OccupancyModel>)> = Vec::with_capacity(specs.len());
    for chunk in specs.chunks(width) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|spec| s.spawn(|| run_one(spec, &split))).collect();
            for (spec, h) in chunk.iter().zip(handles) {
                results.push(h.join().unwrap_or_else(|_| {
                    let mut row = empty_row(spec, &split);
                    row.error = Some("fit thread panicked".into());
                    (row, None)
                }));
            }
        });
    }
    let models = results.iter().map(|(r, m)| (r.model.clone(), m.clone())).collect();
    let mut rows: Vec<EvalRow> = results.into_iter().map(|(r, _)| r).collect();
    rows.sort_by(order);
    Ok(Benchmark {
        report: EvalReport { rows },
        models,
    })
}

fn empty_row(spec: &ModelSpec, split: &Split) -> EvalRow {
    EvalRow {
        model: spec.to_string(),
        features: String::new(),
        params: None,
        params_without_intercept: None,
        test_mape_pct: None,
        test_mse: None,
        path_mape_pct: None,
        path_mse: None,
        fit_s: 0.0,
        inference_s: 0.0,
        path_inference_s: None,
        train_samples: split.train.0.len(),
        test_samples: split.test.0.len(),
        test_paths: split.test_set.paths.len(),
        converged: None,
        error: None,
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl EvalReport {
    /// Comma-separated table with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            wtr.serialize(row).map_err(|e| Error::invalid(e.to_string()))?;
        }
        if self.rows.is_empty() {
            wtr.write_record(super::REPORT_HEADERS).map_err(|e| Error::invalid(e.to_string()))?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Column-aligned text table.
    pub fn to_text(&self) -> String {
        let header = [
            "model", "features", "params", "MAPE %", "MSE", "path MAPE %", "fit s", "infer s", "path infer s", "train",
            "test", "note",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let params = match (r.params, r.params_without_intercept) {
                (Some(p), Some(q)) if p != q => format!("{p} ({q})"),
                (p, _) => opt(&p),
            };
            let note = match (&r.error, r.converged) {
                (Some(e), _) => e.clone(),
                (None, Some(false)) => "not converged".into(),
                _ => String::new(),
            };
            cells.push(vec![
                r.model.clone(),
                r.features.clone(),
                params,
                r.test_mape_pct.map(|v| format!("{v:.3}")).unwrap_or_default(),
                r.test_mse.map(|v| format!("{v:.4e}")).unwrap_or_default(),
                r.path_mape_pct.map(|v| format!("{v:.3}")).unwrap_or_default(),
                format!("{:.4}", r.fit_s),
                format!("{:.4}", r.inference_s),
                r.path_inference_s.map(|v| format!("{v:.4}")).unwrap_or_default(),
                r.train_samples.to_string(),
                r.test_samples.to_string(),
                note,
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_dataset, GridSpec};

    fn data() -> (Dataset, Dataset) {
        let loads: Vec<f64> = (1..=30).map(|i| i as f64 * 0.03).collect();
        let d = generate_dataset(&GridSpec::single_queues(loads, vec![16]), 4, None).unwrap();
        crate::dataset::split(&d, (0.7, 0.3), crate::dataset::SplitMode::Iid, 1).unwrap()
    }

    #[test]
    fn refit_rows_match_and_failures_are_rows() {
        let (train, test) = data();
        let specs: Vec<ModelSpec> = ["exp-poly:3", "exp-poly:3", "bernstein:40"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let b = benchmark(&specs, &train, &test, Some(2)).unwrap();
        let rows = &b.report.rows;
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].without_timing(), rows[1].without_timing());
        // 21 training samples cannot determine 41 coefficients
        assert!(rows[2].error.is_some());
        assert!(rows[0].path_mape_pct.is_some());
        let csv = b.report.to_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), super::super::REPORT_HEADERS.join(","));
        assert!(b.report.to_text().lines().count() == 4);
    }

    #[test]
    fn empty_specs() {
        let (train, test) = data();
        assert!(benchmark(&[], &train, &test, None).is_err());
    }
}
