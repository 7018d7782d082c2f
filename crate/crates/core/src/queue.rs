//! Closed-form M/M/1/K quantities and the engineered per-link feature vector.
//!
//! Everything here is a pure function of `(lambda, mu, K)`. Ratios of the form
//! `(1 - rho^m) / (1 - rho^n)` are evaluated through `expm1`/`ln_1p` so that the
//! `rho = 1` removable singularity and the `rho > 1` overflow regime both stay
//! accurate to a few ulps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the `lambda*(1-piK) = mu*(1-pi0)` consistency check.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Observed inputs for a single link.
///
/// `k` counts every packet the system can hold, including the one in service.
/// The service rate is either given directly or derived as
/// `capacity / avg_packet_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTraffic {
    /// Arrival rate, packets/second.
    pub lambda: f64,
    /// Service rate, packets/second.
    pub mu: Option<f64>,
    #[serde(rename = "K")]
    pub k: u32,
    /// Link capacity, bits/second.
    pub capacity: Option<f64>,
    /// Mean packet size, bits.
    pub avg_packet_size: Option<f64>,
}

impl LinkTraffic {
    pub fn new(lambda: f64, mu: f64, k: u32) -> Self {
        LinkTraffic {
            lambda,
            mu: Some(mu),
            k,
            capacity: None,
            avg_packet_size: None,
        }
    }

    /// Link described by its physical capacity and mean packet size.
    pub fn from_capacity(lambda: f64, capacity: f64, avg_packet_size: f64, k: u32) -> Self {
        LinkTraffic {
            lambda,
            mu: None,
            k,
            capacity: Some(capacity),
            avg_packet_size: Some(avg_packet_size),
        }
    }

    pub fn service_rate(&self) -> Result<f64> {
        match (self.mu, self.capacity, self.avg_packet_size) {
            (Some(mu), _, _) => Ok(mu),
            (None, Some(c), Some(p)) => {
                if !(c > 0.0 && c.is_finite()) || !(p > 0.0 && p.is_finite()) {
                    return Err(Error::invalid(format!(
                        "capacity ({c}) and avg_packet_size ({p}) must be positive and finite"
                    )));
                }
                Ok(c / p)
            }
            _ => Err(Error::invalid(
                "mu absent and capacity/avg_packet_size not both present",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.service_rate()?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive and finite, got {mu}")));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative and finite, got {}",
                self.lambda
            )));
        }
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        for (name, v) in [("capacity", self.capacity), ("avg_packet_size", self.avg_packet_size)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Analytic features for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueFeatures {
    pub rho: f64,
    pub pi0: f64,
    #[serde(rename = "piK")]
    pub pi_k: f64,
    pub lambda_e: f64,
    pub rho_e: f64,
    /// `rho + pi0 * sum_{k=1..K} k rho^k`, kept exactly in this form.
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Se")]
    pub se: f64,
}

/// Names of the raw fields of [`QueueFeatures`], usable as regression inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseFeature {
    Rho,
    Pi0,
    PiK,
    LambdaE,
    RhoE,
    L,
    Se,
}

impl BaseFeature {
    pub const ALL: [BaseFeature; 7] = [
        BaseFeature::Rho,
        BaseFeature::Pi0,
        BaseFeature::PiK,
        BaseFeature::LambdaE,
        BaseFeature::RhoE,
        BaseFeature::L,
        BaseFeature::Se,
    ];

    /// The four-feature set kept for the linear model: pi0, L, rho_e, Se.
    pub const SELECTED: [BaseFeature; 4] = [
        BaseFeature::Pi0,
        BaseFeature::L,
        BaseFeature::RhoE,
        BaseFeature::Se,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseFeature::Rho => "rho",
            BaseFeature::Pi0 => "pi0",
            BaseFeature::PiK => "piK",
            BaseFeature::LambdaE => "lambda_e",
            BaseFeature::RhoE => "rho_e",
            BaseFeature::L => "L",
            BaseFeature::Se => "Se",
        }
    }
}

impl fmt::Display for BaseFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaseFeature::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

impl QueueFeatures {
    pub fn value(&self, feature: BaseFeature) -> f64 {
        match feature {
            BaseFeature::Rho => self.rho,
            BaseFeature::Pi0 => self.pi0,
            BaseFeature::PiK => self.pi_k,
            BaseFeature::LambdaE => self.lambda_e,
            BaseFeature::RhoE => self.rho_e,
            BaseFeature::L => self.l,
            BaseFeature::Se => self.se,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho >= 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "rho",
            detail: format!("expected finite rho >= 0, got {rho}"),
        })
    }
}

fn check_k(k: u32) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "K",
            detail: "K must be at least 1".into(),
        })
    }
}

/// `(1 - rho^m) / (1 - rho^n)` for `1 <= m < n`, with the `rho = 1` limit `m/n`.
pub(crate) fn power_ratio(rho: f64, m: u32, n: u32) -> f64 {
    debug_assert!(m < n);
    if rho == 0.0 {
        return if m == 0 { 0.0 } else { 1.0 };
    }
    if rho == 1.0 {
        return m as f64 / n as f64;
    }
    if rho > 1.0 {
        // (rho^m - 1)/(rho^n - 1) = r^(n-m) (1 - r^m)/(1 - r^n), r = 1/rho
        let r = 1.0 / rho;
        return r.powi((n - m) as i32) * power_ratio(r, m, n);
    }
    let ln = (rho - 1.0).ln_1p();
    (m as f64 * ln).exp_m1() / (n as f64 * ln).exp_m1()
}

/// Offered load `lambda / mu`. May exceed one.
pub fn utilization(lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            name: "lambda",
            detail: format!("expected finite lambda >= 0, got {lambda}"),
        });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            detail: format!("expected finite mu > 0, got {mu}"),
        });
    }
    Ok(lambda / mu)
}

/// Probability that the system is empty, `(1-rho)/(1-rho^(K+1))`.
pub fn pi0(rho: f64, k: u32) -> Result<f64> {
    check_rho(rho)?;
    check_k(k)?;
    Ok(power_ratio(rho, 1, k + 1))
}

/// Probability that the system is full, `rho^K pi0`.
pub fn pi_k(rho: f64, k: u32) -> Result<f64> {
    check_rho(rho)?;
    check_k(k)?;
    if rho > 1.0 {
        // pi_K(rho) = pi_0(1/rho)
        Ok(power_ratio(1.0 / rho, 1, k + 1))
    } else {
        Ok(rho.powi(k as i32) * power_ratio(rho, 1, k + 1))
    }
}

/// `1 - pi0` without cancellation: `rho (1 - rho^K)/(1 - rho^(K+1))`.
pub fn busy_probability(rho: f64, k: u32) -> Result<f64> {
    check_rho(rho)?;
    check_k(k)?;
    Ok(rho * power_ratio(rho, k, k + 1))
}

/// `1 - piK` without cancellation: `(1 - rho^K)/(1 - rho^(K+1))`.
pub fn acceptance_probability(rho: f64, k: u32) -> Result<f64> {
    check_rho(rho)?;
    check_k(k)?;
    if rho == 0.0 {
        return Ok(1.0);
    }
    Ok(power_ratio(rho, k, k + 1))
}

/// Stationary distribution `(pi_0, ..., pi_K)`.
pub fn state_probabilities(rho: f64, k: u32) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_k(k)?;
    let n = k as usize + 1;
    let mut probs = vec![0.0; n];
    if rho <= 1.0 {
        let mut p = pi0(rho, k)?;
        for slot in probs.iter_mut() {
            *slot = p;
            p *= rho;
        }
    } else {
        // walk down from the full state so nothing overflows
        let r = 1.0 / rho;
        let mut p = pi_k(rho, k)?;
        for slot in probs.iter_mut().rev() {
            *slot = p;
            p *= r;
        }
    }
    Ok(probs)
}

/// Textbook mean number in system, `sum_k k pi_k`.
pub fn mean_occupancy(rho: f64, k: u32) -> Result<f64> {
    let probs = state_probabilities(rho, k)?;
    Ok(probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum())
}

/// Admitted arrival rate `lambda (1 - piK)`.
///
/// Cross-checked against `mu (1 - pi0)` before returning; a mismatch means the
/// supplied `rho` is not `lambda / mu`.
pub fn effective_arrival_rate(lambda: f64, mu: f64, rho: f64, k: u32) -> Result<f64> {
    utilization(lambda, mu)?;
    let via_loss = lambda * acceptance_probability(rho, k)?;
    let via_idle = mu * busy_probability(rho, k)?;
    let scale = via_loss.abs().max(via_idle.abs());
    if (via_loss - via_idle).abs() > IDENTITY_TOLERANCE * scale {
        return Err(Error::IdentityViolation { via_loss, via_idle });
    }
    Ok(via_loss)
}

/// `rho + pi0 * sum_{k=1..K} k rho^k`.
///
/// Note the leading `rho`: this is the engineered feature, not the textbook mean
/// queue length (see [`mean_occupancy`]).
pub fn feature_l(rho: f64, k: u32) -> Result<f64> {
    Ok(rho + mean_occupancy(rho, k)?)
}

/// `sum_{k=1..K} k rho_e^k`. `rho_e = 1` is admitted: extreme overload rounds
/// the busy probability to exactly one.
pub fn feature_se(rho_e: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho_e) {
        return Err(Error::Domain {
            name: "rho_e",
            detail: format!("expected 0 <= rho_e <= 1, got {rho_e}"),
        });
    }
    check_k(k)?;
    let mut power = 1.0;
    let mut sum = 0.0;
    for i in 1..=k {
        power *= rho_e;
        sum += i as f64 * power;
    }
    Ok(sum)
}

/// Full feature vector for a link, with `lambda_e` taken from the analytic `piK`.
pub fn featurize(link: &LinkTraffic) -> Result<QueueFeatures> {
    link.validate()?;
    let mu = link.service_rate()?;
    let k = link.k;
    let rho = utilization(link.lambda, mu)?;
    let p0 = pi0(rho, k)?;
    let pk = pi_k(rho, k)?;
    let lambda_e = effective_arrival_rate(link.lambda, mu, rho, k)?;
    // lambda_e <= mu holds exactly; the quotient can round one ulp above 1
    let rho_e = (lambda_e / mu).min(1.0);
    if (rho_e - (1.0 - p0)).abs() > IDENTITY_TOLERANCE {
        return Err(Error::IdentityViolation {
            via_loss: rho_e,
            via_idle: 1.0 - p0,
        });
    }
    Ok(QueueFeatures {
        rho,
        pi0: p0,
        pi_k: pk,
        lambda_e,
        rho_e,
        l: feature_l(rho, k)?,
        se: feature_se(rho_e, k)?,
    })
}

/// Variant of [`featurize`] that takes the admitted rate from a measured drop
/// ratio instead of the analytic `piK`. `pi0` and `piK` stay analytic.
pub fn featurize_with_measured_loss(link: &LinkTraffic, loss_ratio: f64) -> Result<QueueFeatures> {
    link.validate()?;
    if !(0.0..1.0).contains(&loss_ratio) {
        return Err(Error::invalid(format!(
            "measured loss ratio must lie in [0, 1), got {loss_ratio}"
        )));
    }
    let mu = link.service_rate()?;
    let k = link.k;
    let rho = utilization(link.lambda, mu)?;
    let lambda_e = link.lambda * (1.0 - loss_ratio);
    let rho_e = lambda_e / mu;
    Ok(QueueFeatures {
        rho,
        pi0: pi0(rho, k)?,
        pi_k: pi_k(rho, k)?,
        lambda_e,
        rho_e,
        l: feature_l(rho, k)?,
        se: feature_se(rho_e, k)?,
    })
}

/// Per-link delay from an occupancy estimate: `y_hat * avg_packet_size / capacity`.
pub fn occupancy_to_delay(y_hat: f64, avg_packet_size: f64, capacity: f64) -> Result<f64> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::invalid(format!("capacity must be positive, got {capacity}")));
    }
    if !(avg_packet_size > 0.0 && avg_packet_size.is_finite()) {
        return Err(Error::invalid(format!(
            "avg_packet_size must be positive, got {avg_packet_size}"
        )));
    }
    if !(y_hat >= 0.0) {
        return Err(Error::invalid(format!("occupancy must be nonnegative, got {y_hat}")));
    }
    Ok(y_hat * avg_packet_size / capacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn utilization_examples() {
        assert_eq!(utilization(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(utilization(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(utilization(3.0, 2.0).unwrap(), 1.5);
        assert!(utilization(1.0, 0.0).is_err());
        assert!(utilization(-1.0, 1.0).is_err());
        assert!(utilization(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn pi0_and_pik_examples() {
        assert_eq!(pi0(0.0, 5).unwrap(), 1.0);
        assert!(close(pi0(1.0, 5).unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(pi0(0.5, 2).unwrap(), 4.0 / 7.0, 1e-15));
        assert_eq!(pi_k(0.0, 3).unwrap(), 0.0);
        assert!(close(pi_k(1.0, 5).unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(pi_k(0.5, 2).unwrap(), 1.0 / 7.0, 1e-15));
        assert!(pi0(-0.1, 3).is_err());
        assert!(pi_k(0.5, 0).is_err());
    }

    #[test]
    fn effective_rate_examples() {
        assert!(close(effective_arrival_rate(1.0, 2.0, 0.5, 2).unwrap(), 6.0 / 7.0, 1e-15));
        assert_eq!(effective_arrival_rate(0.0, 1.0, 0.0, 4).unwrap(), 0.0);
        assert!(close(effective_arrival_rate(1.0, 1.0, 1.0, 5).unwrap(), 5.0 / 6.0, 1e-15));
    }

    #[test]
    fn effective_rate_rejects_inconsistent_rho() {
        let err = effective_arrival_rate(1.0, 2.0, 0.6, 2).unwrap_err();
        assert!(matches!(err, Error::IdentityViolation { .. }));
    }

    #[test]
    fn feature_examples() {
        assert_eq!(feature_l(0.0, 8).unwrap(), 0.0);
        assert!(close(feature_l(0.5, 2).unwrap(), 0.5 + (4.0 / 7.0) * (0.5 + 2.0 * 0.25), 1e-14));
        assert!(close(feature_l(1.0, 2).unwrap(), 2.0, 1e-14));
        assert_eq!(feature_se(0.0, 32).unwrap(), 0.0);
        assert!(close(feature_se(0.5, 2).unwrap(), 1.0, 1e-15));
        assert!(close(feature_se(0.9, 1).unwrap(), 0.9, 1e-15));
        assert_eq!(feature_se(1.0, 3).unwrap(), 6.0);
        assert!(feature_se(1.1, 3).is_err());
        assert!(feature_se(-0.2, 3).is_err());
    }

    #[test]
    fn featurize_chains_components() {
        let f = featurize(&LinkTraffic::new(1.0, 2.0, 2)).unwrap();
        assert_eq!(f.rho, 0.5);
        assert!(close(f.pi0, 4.0 / 7.0, 1e-15));
        assert!(close(f.pi_k, 1.0 / 7.0, 1e-15));
        assert!(close(f.lambda_e, 6.0 / 7.0, 1e-15));
        assert!(close(f.rho_e, 3.0 / 7.0, 1e-15));
        assert!(close(f.l, 1.071_428_571_428_571_4, 1e-12));
        let re = 3.0 / 7.0;
        assert!(close(f.se, re + 2.0 * re * re, 1e-14));

        let idle = featurize(&LinkTraffic::new(0.0, 1.0, 32)).unwrap();
        assert_eq!((idle.rho, idle.pi0, idle.rho_e, idle.l, idle.se), (0.0, 1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mu_from_capacity() {
        let link = LinkTraffic::from_capacity(100.0, 1e6, 1e4, 10);
        assert_eq!(link.service_rate().unwrap(), 100.0);
        let f = featurize(&link).unwrap();
        assert_eq!(f.rho, 1.0);
        let bad = LinkTraffic {
            capacity: None,
            ..link
        };
        assert!(featurize(&bad).is_err());
    }

    #[test]
    fn measured_loss_variant() {
        let link = LinkTraffic::new(2.0, 1.0, 4);
        let f = featurize_with_measured_loss(&link, 0.6).unwrap();
        assert!(close(f.lambda_e, 0.8, 1e-15));
        assert!(close(f.rho_e, 0.8, 1e-15));
        assert!(featurize_with_measured_loss(&link, 1.0).is_err());
    }

    #[test]
    fn delay_conversion() {
        assert!(close(occupancy_to_delay(2.0, 1000.0, 1e6).unwrap(), 0.002, 1e-18));
        assert_eq!(occupancy_to_delay(0.0, 123.0, 456.0).unwrap(), 0.0);
        assert_eq!(occupancy_to_delay(1.0, 5e3, 5e3).unwrap(), 1.0);
        assert!(occupancy_to_delay(1.0, 0.0, 1.0).is_err());
        assert!(occupancy_to_delay(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn pi0_continuous_at_one() {
        for k in [1, 2, 5, 32, 200] {
            let below = pi0(1.0 - 1e-9, k).unwrap();
            let above = pi0(1.0 + 1e-9, k).unwrap();
            let at = pi0(1.0, k).unwrap();
            assert!((below - above).abs() < 1e-6, "K={k}");
            assert!((below - at).abs() < 1e-6);
        }
    }

    #[test]
    fn heavy_overload_stays_finite() {
        let f = featurize(&LinkTraffic::new(1e3, 1.0, 400)).unwrap();
        assert!(f.pi0 >= 0.0 && f.pi_k > 0.99 && f.rho_e <= 1.0);
        assert!(f.l.is_finite() && f.se.is_finite());
    }

    proptest! {
        #[test]
        fn distribution_normalizes(rho in 0.0f64..4.0, k in 1u32..80) {
            let probs = state_probabilities(rho, k).unwrap();
            let total: f64 = probs.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!((probs[0] - pi0(rho, k).unwrap()).abs() <= 1e-15);
            prop_assert!((probs[k as usize] - pi_k(rho, k).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn featurize_identities(lambda in 0.0f64..50.0, mu in 0.01f64..20.0, k in 1u32..64) {
            let f = featurize(&LinkTraffic::new(lambda, mu, k)).unwrap();
            prop_assert!((f.rho_e - (1.0 - f.pi0)).abs() <= 1e-12);
            prop_assert!(f.rho_e <= 1.0);
            prop_assert!(f.lambda_e <= lambda.min(mu) * (1.0 + 1e-12));
            prop_assert!(f.pi0 > 0.0 || f.rho > 1.0);
            prop_assert!(f.pi_k <= 1.0);
        }

        #[test]
        fn monotone_in_rho(a in 0.0f64..3.0, b in 0.0f64..3.0, k in 1u32..40) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(pi0(lo, k).unwrap() > pi0(hi, k).unwrap());
            prop_assert!(pi_k(lo, k).unwrap() < pi_k(hi, k).unwrap());
        }
    }
}
