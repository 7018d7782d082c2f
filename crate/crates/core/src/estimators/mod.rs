//! Occupancy estimators: a linear model over engineered features and four
//! one-dimensional curves of the effective utilization `rho_e`.

mod basis;
mod exp_poly;
mod features;
mod implicit;
mod linear;
mod stepwise;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{mape, mse};
use crate::queue::{BaseFeature, QueueFeatures};

pub use basis::{basis_value, fit_basis, BasisEvaluator, BasisKind, BasisModel};
pub use exp_poly::{fit_exp_poly, ExpPolyModel, MAX_DEGREE};
pub use features::{
    build_candidate_features, candidate_exprs, parse_features, FeatureExpr, FeatureMatrix, Transform, EXP_CLAMP,
};
pub use implicit::{fit_implicit, CurveLoss, ImplicitConfig, ImplicitFit, ImplicitModel};
pub use linear::{fit_linear, LinearModel};
pub use stepwise::{forward_stepwise, StepwiseConfig, StepwiseResult};

/// Any fitted estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OccupancyModel {
    Linear(LinearModel),
    ExpPoly(ExpPolyModel),
    Basis(BasisModel),
    Implicit(ImplicitModel),
}

/// Per-batch state so repeated predictions avoid re-deriving constants.
enum Prepared<'a> {
    Linear(&'a LinearModel, Vec<FeatureExpr>),
    ExpPoly(&'a ExpPolyModel),
    Basis(&'a BasisModel, BasisEvaluator),
    Implicit(&'a ImplicitModel),
}

impl Prepared<'_> {
    fn rho_e(&self, x: f64) -> Result<f64> {
        match self {
            Prepared::Linear(m, _) => Err(Error::FeatureMismatch {
                expected: m.feature_names.clone(),
                found: vec!["rho_e".into()],
            }),
            Prepared::ExpPoly(m) => Ok(m.predict(x)),
            Prepared::Basis(m, eval) => m.predict_with(eval, x),
            Prepared::Implicit(m) => Ok(m.predict(x)),
        }
    }

    fn features(&self, f: &QueueFeatures) -> Result<f64> {
        match self {
            Prepared::Linear(m, exprs) => {
                Ok(m.intercept + exprs.iter().zip(&m.weights).map(|(e, w)| w * e.eval(f)).sum::<f64>())
            }
            _ => self.rho_e(f.rho_e),
        }
    }
}

impl OccupancyModel {
    fn prepare(&self) -> Result<Prepared<'_>> {
        Ok(match self {
            OccupancyModel::Linear(m) => {
                if m.weights.len() != m.feature_names.len() {
                    return Err(Error::ModelFormat(format!(
                        "{} weights for {} features",
                        m.weights.len(),
                        m.feature_names.len()
                    )));
                }
                Prepared::Linear(m, parse_features(&m.feature_names)?)
            }
            OccupancyModel::ExpPoly(m) => Prepared::ExpPoly(m),
            OccupancyModel::Basis(m) => {
                if m.alphas.len() != m.k as usize + 1 {
                    return Err(Error::ModelFormat(format!(
                        "basis with K={} needs {} coefficients, found {}",
                        m.k,
                        m.k + 1,
                        m.alphas.len()
                    )));
                }
                Prepared::Basis(m, m.evaluator()?)
            }
            OccupancyModel::Implicit(m) => {
                m.check_constraints()?;
                Prepared::Implicit(m)
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OccupancyModel::Linear(_) => "linear",
            OccupancyModel::ExpPoly(_) => "exp-poly",
            OccupancyModel::Basis(m) => m.basis.as_str(),
            OccupancyModel::Implicit(_) => "implicit",
        }
    }

    /// Fitted coefficients, including the linear intercept.
    pub fn parameter_count(&self) -> usize {
        match self {
            OccupancyModel::Linear(m) => m.parameter_count(),
            OccupancyModel::ExpPoly(m) => m.parameter_count(),
            OccupancyModel::Basis(m) => m.parameter_count(),
            OccupancyModel::Implicit(m) => m.parameter_count(),
        }
    }

    /// Parameter count with the linear intercept left out, as commonly tabulated.
    pub fn parameter_count_without_intercept(&self) -> usize {
        match self {
            OccupancyModel::Linear(m) => m.weights.len(),
            other => other.parameter_count(),
        }
    }

    /// Names of the inputs the model reads.
    pub fn input_features(&self) -> Vec<String> {
        match self {
            OccupancyModel::Linear(m) => m.feature_names.clone(),
            _ => vec![BaseFeature::RhoE.to_string()],
        }
    }

    pub fn predict(&self, features: &QueueFeatures) -> Result<f64> {
        self.prepare()?.features(features)
    }

    /// Curve models only; the linear model needs a full feature vector.
    pub fn predict_rho_e(&self, rho_e: f64) -> Result<f64> {
        self.prepare()?.rho_e(rho_e)
    }

    pub fn predict_batch(&self, rows: &[QueueFeatures]) -> Result<Vec<f64>> {
        let p = self.prepare()?;
        rows.iter().map(|f| p.features(f)).collect()
    }

    pub fn predict_batch_rho_e(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let p = self.prepare()?;
        xs.iter().map(|&x| p.rho_e(x)).collect()
    }
}

/// What to fit: model family plus hyperparameters.
///
/// String forms: `linear` (the four default features), `linear:f1,f2,...`,
/// `exp-poly:<degree>`, `mm1k:<K>`, `bernstein:<K>`, `implicit:<N>:<alpha>`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Linear { features: Vec<String> },
    ExpPoly { degree: u32 },
    Basis { kind: BasisKind, k: u32 },
    Implicit(ImplicitConfig),
}

impl ModelSpec {
    pub fn linear_default() -> Self {
        ModelSpec::Linear {
            features: BaseFeature::SELECTED.iter().map(ToString::to_string).collect(),
        }
    }

    /// Checks hyperparameters without fitting.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Linear { features } => {
                if features.is_empty() {
                    return Err(Error::invalid("linear model needs at least one feature"));
                }
                parse_features(features).map(|_| ())
            }
            ModelSpec::ExpPoly { degree } if !(1..=MAX_DEGREE).contains(degree) => Err(Error::invalid(format!(
                "exp-poly degree must lie in 1..={MAX_DEGREE}, got {degree}"
            ))),
            ModelSpec::Basis { k, .. } if *k == 0 => Err(Error::invalid("basis K must be at least 1")),
            ModelSpec::Implicit(cfg) if cfg.segments < 2 => Err(Error::invalid("implicit N must be at least 2")),
            ModelSpec::Implicit(cfg) if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) => {
                Err(Error::invalid("implicit alpha must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Fit on featurized rows against occupancy targets.
    pub fn fit(&self, rows: &[QueueFeatures], targets: &[f64]) -> Result<(OccupancyModel, FitReport)> {
        self.validate()?;
        if rows.len() != targets.len() {
            return Err(Error::Fit(format!("{} rows for {} targets", rows.len(), targets.len())));
        }
        if rows.is_empty() {
            return Err(Error::Fit("empty data".into()));
        }
        let start = Instant::now();
        let rho_e = || rows.iter().map(|f| f.rho_e).collect::<Vec<f64>>();
        let mut iterations = None;
        let mut converged = None;
        let model = match self {
            ModelSpec::Linear { features } => {
                let exprs = parse_features(features)?;
                let columns: Vec<Vec<f64>> = exprs.iter().map(|e| rows.iter().map(|f| e.eval(f)).collect()).collect();
                let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
                OccupancyModel::Linear(fit_linear(features, &refs, targets)?)
            }
            ModelSpec::ExpPoly { degree } => OccupancyModel::ExpPoly(fit_exp_poly(&rho_e(), targets, *degree)?),
            ModelSpec::Basis { kind, k } => OccupancyModel::Basis(fit_basis(*kind, *k, &rho_e(), targets)?),
            ModelSpec::Implicit(cfg) => {
                let fit = fit_implicit(&rho_e(), targets, cfg)?;
                iterations = Some(fit.iterations);
                converged = Some(fit.converged);
                OccupancyModel::Implicit(fit.model)
            }
        };
        let fit_seconds = start.elapsed().as_secs_f64();
        let pred = model.predict_batch(rows)?;
        let report = FitReport {
            model: self.to_string(),
            train_mape: mape(&pred, targets).unwrap_or(f64::NAN),
            train_mse: mse(&pred, targets)?,
            fit_seconds,
            samples: rows.len(),
            iterations,
            converged,
        };
        Ok((model, report))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Linear { features } => write!(f, "linear:{}", features.join(",")),
            ModelSpec::ExpPoly { degree } => write!(f, "exp-poly:{degree}"),
            ModelSpec::Basis { kind, k } => write!(f, "{kind}:{k}"),
            ModelSpec::Implicit(cfg) => write!(f, "implicit:{}:{}", cfg.segments, cfg.alpha),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("model spec {s:?}: {what}"));
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let int = |i: usize, default: u32| -> Result<u32> {
            args.get(i).map_or(Ok(default), |v| v.parse().map_err(|_| bad("expected an integer")))
        };
        let spec = match kind {
            "linear" => match args.as_slice() {
                [] => ModelSpec::linear_default(),
                [list] => ModelSpec::Linear {
                    features: list.split(',').map(|x| x.trim().to_string()).collect(),
                },
                _ => return Err(bad("too many fields")),
            },
            "exp-poly" => ModelSpec::ExpPoly { degree: int(0, 8)? },
            "mm1k" | "bernstein" => ModelSpec::Basis {
                kind: kind.parse()?,
                k: int(0, 32)?,
            },
            "implicit" => {
                let mut cfg = ImplicitConfig {
                    segments: int(0, 12)? as usize,
                    ..ImplicitConfig::default()
                };
                if let Some(a) = args.get(1) {
                    cfg.alpha = a.parse().map_err(|_| bad("expected a number for alpha"))?;
                }
                if args.len() > 2 {
                    return Err(bad("too many fields"));
                }
                ModelSpec::Implicit(cfg)
            }
            _ => return Err(bad("unknown model kind")),
        };
        if !matches!(spec, ModelSpec::Linear { .. } | ModelSpec::Implicit(_)) && args.len() > 1 {
            return Err(bad("too many fields"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    /// Percent.
    pub train_mape: f64,
    pub train_mse: f64,
    pub fit_seconds: f64,
    pub samples: usize,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

/// Training facts stored alongside a model. Timing is left out so that the
/// document is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub spec: String,
    pub samples: usize,
    pub train_mape: f64,
    pub train_mse: f64,
    pub parameters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

pub const MODEL_FORMAT: &str = "queue-kpi-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted model with its training metadata, stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub model: OccupancyModel,
    pub training: TrainingInfo,
}

impl ModelDocument {
    pub fn new(model: OccupancyModel, report: &FitReport) -> Self {
        let training = TrainingInfo {
            spec: report.model.clone(),
            samples: report.samples,
            train_mape: report.train_mape,
            train_mse: report.train_mse,
            parameters: model.parameter_count(),
            iterations: report.iterations,
            converged: report.converged,
        };
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model,
            training,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ModelDocument = toml::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {MODEL_FORMAT} version {MODEL_VERSION}, found {} version {}",
                doc.format, doc.version
            )));
        }
        doc.model.prepare()?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{featurize, LinkTraffic};

    fn rows() -> (Vec<QueueFeatures>, Vec<f64>) {
        let rows: Vec<QueueFeatures> = (1..60)
            .map(|i| featurize(&LinkTraffic::new(i as f64 * 0.02, 1.0, 16)).unwrap())
            .collect();
        let y = rows.iter().map(|f| crate::queue::mean_occupancy(f.rho, 16).unwrap()).collect();
        (rows, y)
    }

    #[test]
    fn spec_strings() {
        for s in ["exp-poly:8", "bernstein:32", "mm1k:32", "implicit:12:0.00001", "linear:pi0,L,rho_e,Se"] {
            let spec: ModelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        }
        assert_eq!("linear".parse::<ModelSpec>().unwrap(), ModelSpec::linear_default());
        assert!("exp-poly:0".parse::<ModelSpec>().is_err());
        assert!("exp-poly:x".parse::<ModelSpec>().is_err());
        assert!("gbrt".parse::<ModelSpec>().is_err());
        assert!("linear:nope".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn parameter_counts() {
        let (rows, y) = rows();
        let count = |s: &str| s.parse::<ModelSpec>().unwrap().fit(&rows, &y).unwrap().0.parameter_count();
        assert_eq!(count("linear"), 5);
        assert_eq!(count("bernstein:32"), 33);
        assert_eq!(count("mm1k:32"), 33);
        assert_eq!(count("exp-poly:8"), 9);
        let (m, _) = ModelSpec::Implicit(ImplicitConfig { iterations: 50, ..Default::default() })
            .fit(&rows, &y)
            .unwrap();
        assert_eq!(m.parameter_count(), 24);
        let (lin, _) = ModelSpec::linear_default().fit(&rows, &y).unwrap();
        assert_eq!(lin.parameter_count_without_intercept(), 4);
    }

    #[test]
    fn linear_prediction_on_named_features() {
        let m = OccupancyModel::Linear(LinearModel {
            feature_names: ["pi0", "L", "rho_e", "Se"].map(String::from).to_vec(),
            weights: vec![1.0, 0.0, 0.0, 0.0],
            intercept: 0.0,
            rank_deficient: false,
        });
        let f = QueueFeatures {
            rho: 0.0,
            pi0: 0.25,
            pi_k: 0.0,
            lambda_e: 0.0,
            rho_e: 0.75,
            l: 3.0,
            se: 2.0,
        };
        assert_eq!(m.predict(&f).unwrap(), 0.25);
        assert!(m.predict_rho_e(0.5).is_err());
    }

    #[test]
    fn document_round_trip() {
        let (rows, y) = rows();
        for s in ["linear", "exp-poly:3", "bernstein:8", "implicit:4:0.00001"] {
            let spec: ModelSpec = s.parse().unwrap();
            let (model, report) = spec.fit(&rows, &y).unwrap();
            let doc = ModelDocument::new(model, &report);
            let text = doc.to_toml().unwrap();
            assert_eq!(ModelDocument::from_toml(&text).unwrap(), doc, "{text}");
        }
    }

    #[test]
    fn predictions_are_pure() {
        let (rows, y) = rows();
        let (m, _) = "bernstein:10".parse::<ModelSpec>().unwrap().fit(&rows, &y).unwrap();
        assert_eq!(m.predict_batch(&rows).unwrap(), m.predict_batch(&rows).unwrap());
        assert_eq!(m.predict(&rows[3]).unwrap(), m.predict_batch(&rows).unwrap()[3]);
    }
}
