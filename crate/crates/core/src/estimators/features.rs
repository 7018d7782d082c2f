use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::queue::{BaseFeature, QueueFeatures};

/// Upper clamp on the argument of the `exp` transform.
pub const EXP_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transform {
    Square,
    Cube,
    Log1p,
    Exp,
    Sqrt,
}

impl Transform {
    pub const ALL: [Transform; 5] = [
        Transform::Square,
        Transform::Cube,
        Transform::Log1p,
        Transform::Exp,
        Transform::Sqrt,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Square => x * x,
            Transform::Cube => x * x * x,
            Transform::Log1p => x.ln_1p(),
            Transform::Exp => x.min(EXP_CLAMP).exp(),
            Transform::Sqrt => x.sqrt(),
        }
    }
}

/// A derived regression input: a base feature, a transform of one, or a
/// product of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureExpr {
    Base(BaseFeature),
    Unary(Transform, BaseFeature),
    Product(BaseFeature, BaseFeature),
}

impl FeatureExpr {
    pub fn eval(&self, f: &QueueFeatures) -> f64 {
        match *self {
            FeatureExpr::Base(b) => f.value(b),
            FeatureExpr::Unary(t, b) => t.apply(f.value(b)),
            FeatureExpr::Product(a, b) => f.value(a) * f.value(b),
        }
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FeatureExpr::Base(b) => write!(f, "{b}"),
            FeatureExpr::Unary(Transform::Square, b) => write!(f, "{b}^2"),
            FeatureExpr::Unary(Transform::Cube, b) => write!(f, "{b}^3"),
            FeatureExpr::Unary(Transform::Log1p, b) => write!(f, "log1p({b})"),
            FeatureExpr::Unary(Transform::Exp, b) => write!(f, "exp({b})"),
            FeatureExpr::Unary(Transform::Sqrt, b) => write!(f, "sqrt({b})"),
            FeatureExpr::Product(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl FromStr for FeatureExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownFeature(s.to_string());
        let base = |x: &str| x.parse::<BaseFeature>().map_err(|_| unknown());
        let wrapped = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        if let Some(b) = s.strip_suffix("^2") {
            return Ok(FeatureExpr::Unary(Transform::Square, base(b)?));
        }
        if let Some(b) = s.strip_suffix("^3") {
            return Ok(FeatureExpr::Unary(Transform::Cube, base(b)?));
        }
        for (prefix, t) in [
            ("log1p(", Transform::Log1p),
            ("exp(", Transform::Exp),
            ("sqrt(", Transform::Sqrt),
        ] {
            if let Some(b) = wrapped(prefix) {
                return Ok(FeatureExpr::Unary(t, base(b)?));
            }
        }
        if let Some((a, b)) = s.split_once('*') {
            return Ok(FeatureExpr::Product(base(a)?, base(b)?));
        }
        Ok(FeatureExpr::Base(base(s)?))
    }
}

/// Named candidate columns over a set of links.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub exprs: Vec<FeatureExpr>,
    pub columns: Vec<Vec<f64>>,
    /// Candidates removed because they produced a non-finite value, with the reason.
    pub dropped: Vec<(String, String)>,
}

impl FeatureMatrix {
    pub fn names(&self) -> Vec<String> {
        self.exprs.iter().map(ToString::to_string).collect()
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.exprs
            .iter()
            .position(|e| e.to_string() == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Expression list in canonical order: the base features, then each base
/// feature's transforms, then all pairwise products.
pub fn candidate_exprs(base: &[BaseFeature]) -> Vec<FeatureExpr> {
    let mut exprs: Vec<FeatureExpr> = base.iter().map(|&b| FeatureExpr::Base(b)).collect();
    for &b in base {
        exprs.extend(Transform::ALL.iter().map(|&t| FeatureExpr::Unary(t, b)));
    }
    for (i, &a) in base.iter().enumerate() {
        for &b in &base[i + 1..] {
            exprs.push(FeatureExpr::Product(a, b));
        }
    }
    exprs
}

/// Evaluate the candidate set of `base` on every row. Columns that produce a
/// non-finite value anywhere are dropped and recorded.
pub fn build_candidate_features(base: &[BaseFeature], rows: &[QueueFeatures]) -> Result<FeatureMatrix> {
    for (i, r) in rows.iter().enumerate() {
        if let Some(b) = base.iter().find(|&&b| !r.value(b).is_finite()) {
            return Err(Error::invalid(format!("row {i}: base feature {b} is not finite")));
        }
    }
    let mut out = FeatureMatrix {
        exprs: Vec::new(),
        columns: Vec::new(),
        dropped: Vec::new(),
    };
    for expr in candidate_exprs(base) {
        let column: Vec<f64> = rows.iter().map(|r| expr.eval(r)).collect();
        match column.iter().position(|v| !v.is_finite()) {
            Some(i) => out
                .dropped
                .push((expr.to_string(), format!("non-finite value {} at row {i}", column[i]))),
            None => {
                out.exprs.push(expr);
                out.columns.push(column);
            }
        }
    }
    Ok(out)
}

/// Resolve feature names into expressions.
pub fn parse_features(names: &[String]) -> Result<Vec<FeatureExpr>> {
    names.iter().map(|n| n.parse()).collect()
}
