use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::queue::power_ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// `x^n (1-x) / (1-x^(K+1))`, scaled to peak at one.
    Mm1k,
    /// `C(K,n) x^n (1-x)^(K-n)`.
    Bernstein,
}

impl BasisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisKind::Mm1k => "mm1k",
            BasisKind::Bernstein => "bernstein",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm1k" => Ok(BasisKind::Mm1k),
            "bernstein" => Ok(BasisKind::Bernstein),
            _ => Err(Error::invalid(format!("unknown basis {s:?} (expected mm1k or bernstein)"))),
        }
    }
}

/// `x^n pi0(x)`; `pi0` has the `x = 1` limit `1/(K+1)`.
fn phi(n: u32, k: u32, x: f64) -> f64 {
    x.powi(n as i32) * power_ratio(x, 1, k + 1)
}

fn peak(n: u32) -> f64 {
    n as f64 / (n as f64 + 1.0)
}

fn check(kind: BasisKind, n: u32, k: u32, x: f64) -> Result<()> {
    if k == 0 || n > k {
        return Err(Error::Domain {
            name: "n",
            detail: format!("need 0 <= n <= K with K >= 1, got n={n}, K={k}"),
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            detail: format!("{kind} basis is defined on [0, 1], got {x}"),
        });
    }
    Ok(())
}

/// Evaluates all `K+1` functions of one basis; the normalizers are computed once.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    kind: BasisKind,
    k: u32,
    /// Peak values for mm1k (divided out), binomial coefficients for Bernstein.
    scale: Vec<f64>,
}

impl BasisEvaluator {
    pub fn new(kind: BasisKind, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain {
                name: "K",
                detail: "K must be at least 1".into(),
            });
        }
        let scale = match kind {
            BasisKind::Mm1k => (0..=k).map(|n| phi(n, k, peak(n))).collect(),
            BasisKind::Bernstein => {
                let mut c = vec![1.0; k as usize + 1];
                for n in 1..=k as usize {
                    c[n] = c[n - 1] * (k as usize + 1 - n) as f64 / n as f64;
                }
                c
            }
        };
        Ok(BasisEvaluator { kind, k, scale })
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    /// Function `n` at `x`; no domain check.
    pub fn value(&self, n: u32, x: f64) -> f64 {
        match self.kind {
            BasisKind::Mm1k => phi(n, self.k, x) / self.scale[n as usize],
            BasisKind::Bernstein => {
                self.scale[n as usize] * x.powi(n as i32) * (1.0 - x).powi((self.k - n) as i32)
            }
        }
    }

    /// All functions at `x`, written into `out`.
    pub fn row(&self, x: f64, out: &mut [f64]) {
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = self.value(n as u32, x);
        }
    }
}

/// Function `n` of the `K`-th basis of `kind` at `x`.
pub fn basis_value(kind: BasisKind, n: u32, k: u32, x: f64) -> Result<f64> {
    check(kind, n, k, x)?;
    Ok(match kind {
        BasisKind::Mm1k => phi(n, k, x) / phi(n, k, peak(n)),
        BasisKind::Bernstein => BasisEvaluator::new(kind, k)?.value(n, x),
    })
}

/// `y = sum_n alphas[n] f_n(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisModel {
    pub basis: BasisKind,
    #[serde(rename = "K")]
    pub k: u32,
    pub alphas: Vec<f64>,
}

impl BasisModel {
    pub fn parameter_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn evaluator(&self) -> Result<BasisEvaluator> {
        BasisEvaluator::new(self.basis, self.k)
    }

    pub fn predict_with(&self, eval: &BasisEvaluator, x: f64) -> Result<f64> {
        check(self.basis, 0, self.k, x)?;
        Ok(self
            .alphas
            .iter()
            .enumerate()
            .map(|(n, a)| a * eval.value(n as u32, x))
            .sum())
    }

    pub fn predict(&self, x: f64) -> Result<f64> {
        self.predict_with(&self.evaluator()?, x)
    }
}

/// Least squares over the `K+1` basis columns.
pub fn fit_basis(kind: BasisKind, k: u32, x: &[f64], y: &[f64]) -> Result<BasisModel> {
    let eval = BasisEvaluator::new(kind, k)?;
    if x.len() != y.len() {
        return Err(Error::Fit("input and target lengths differ".into()));
    }
    if x.len() < k as usize + 2 {
        return Err(Error::Fit(format!("need at least K+2 = {} samples", k + 2)));
    }
    if let Some(&bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain {
            name: "x",
            detail: format!("{kind} basis is defined on [0, 1], got {bad}"),
        });
    }
    let mut columns = vec![Vec::with_capacity(x.len()); eval.len()];
    let mut row = vec![0.0; eval.len()];
    for &v in x {
        eval.row(v, &mut row);
        for (c, r) in columns.iter_mut().zip(&row) {
            c.push(*r);
        }
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let sol = lstsq(&refs, y)?;
    Ok(BasisModel {
        basis: kind,
        k,
        alphas: sol.coef,
    })
}
