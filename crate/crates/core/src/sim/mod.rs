//! Discrete-event simulation of finite FIFO queues.
//!
//! [`simulate_queue`] runs one queue fed by a Poisson stream; [`simulate_tandem`]
//! runs a feed-forward network of such queues shared by several flows. Both are
//! single-threaded and bit-reproducible: the random source is a ChaCha8 stream
//! seeded with `seed` on stream number `stream`, so distinct grid points get
//! independent streams from the same seed.
//!
//! Confidence intervals come from batch means over [`BATCHES`] equal-count
//! batches of the measured arrivals.

mod generate;
mod monitor;
mod single;
mod tandem;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_dataset, GridSpec, ServiceKind, Topology, GENERATOR};
pub use single::simulate_queue;
pub use tandem::{simulate_tandem, FlowResult, FlowSpec, LinkSpec, TandemConfig, TandemResult};

/// Number of batches used for batch-means confidence intervals.
pub const BATCHES: usize = 32;

/// Smallest accepted `measured_events`.
pub const MIN_MEASURED_EVENTS: u64 = 10_000;

/// Service time distribution, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { time: f64 },
    /// Normal(mean, std) conditioned on being positive.
    TruncatedNormal { mean: f64, std: f64 },
}

impl ServiceDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ServiceDistribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            ServiceDistribution::Deterministic { time } => time > 0.0 && time.is_finite(),
            ServiceDistribution::TruncatedNormal { mean, std } => {
                mean > 0.0 && mean.is_finite() && std >= 0.0 && std.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SimConfig(format!("invalid service distribution {self:?}")))
        }
    }

    /// Mean service time. For the truncated normal this is the mean of the
    /// truncated law, `m + s*phi(a)/(1-Phi(a))` with `a = -m/s`.
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential { rate } => 1.0 / rate,
            ServiceDistribution::Deterministic { time } => time,
            ServiceDistribution::TruncatedNormal { mean, std } => {
                if std == 0.0 {
                    return mean;
                }
                let a = -mean / std;
                let pdf = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let tail = 0.5 * statrs::function::erf::erfc(a / std::f64::consts::SQRT_2);
                mean + std * pdf / tail
            }
        }
    }

    /// Service rate `1 / mean()`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub(crate) fn sampler(&self) -> Result<ServiceSampler> {
        self.validate()?;
        Ok(match *self {
            ServiceDistribution::Exponential { rate } => {
                ServiceSampler::Exp(Exp::new(rate).map_err(|e| Error::SimConfig(e.to_string()))?)
            }
            ServiceDistribution::Deterministic { time } => ServiceSampler::Fixed(time),
            ServiceDistribution::TruncatedNormal { mean, std } => {
                if std == 0.0 {
                    ServiceSampler::Fixed(mean)
                } else {
                    ServiceSampler::Normal(
                        Normal::new(mean, std).map_err(|e| Error::SimConfig(e.to_string()))?,
                    )
                }
            }
        })
    }
}

pub(crate) enum ServiceSampler {
    Exp(Exp<f64>),
    Fixed(f64),
    Normal(Normal<f64>),
}

impl ServiceSampler {
    #[inline]
    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ServiceSampler::Exp(d) => d.sample(rng),
            ServiceSampler::Fixed(t) => *t,
            ServiceSampler::Normal(d) => loop {
                // rejection keeps the conditional law exact
                let s = d.sample(rng);
                if s > 0.0 {
                    break s;
                }
            },
        }
    }
}

/// One single-queue simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Poisson arrival rate, packets/second.
    pub lambda: f64,
    pub service: ServiceDistribution,
    /// System capacity including the packet in service.
    #[serde(rename = "K")]
    pub k: u32,
    /// Arrivals discarded before measurement starts.
    pub warmup_events: u64,
    /// Arrivals inside the measurement window.
    pub measured_events: u64,
    pub seed: u64,
    /// ChaCha stream number; distinct streams are independent.
    #[serde(default)]
    pub stream: u64,
}

impl SimConfig {
    /// Config with the default warmup of 10% of `measured_events`.
    pub fn new(
        lambda: f64,
        service: ServiceDistribution,
        k: u32,
        measured_events: u64,
        seed: u64,
    ) -> Self {
        SimConfig {
            lambda,
            service,
            k,
            warmup_events: measured_events / 10,
            measured_events,
            seed,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::SimConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        self.service.validate()?;
        if self.k < 1 {
            return Err(Error::SimConfig("K must be at least 1".into()));
        }
        check_measured(self.measured_events)
    }
}

pub(crate) fn check_measured(measured: u64) -> Result<()> {
    if measured < MIN_MEASURED_EVENTS {
        return Err(Error::SimConfig(format!(
            "measured_events must be at least {MIN_MEASURED_EVENTS}, got {measured}"
        )));
    }
    Ok(())
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// 95% confidence half-widths (batch means) for each estimate in [`SimResult`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfWidths {
    pub mean_occupancy: f64,
    pub loss_prob: f64,
    pub mean_sojourn: f64,
    pub pi0: f64,
    #[serde(rename = "piK")]
    pub pi_k: f64,
    pub lambda_e: f64,
}

/// Steady-state estimates for one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Time-averaged number in system.
    pub mean_occupancy: f64,
    /// Dropped / offered arrivals.
    pub loss_prob: f64,
    /// Mean time in system of admitted packets, seconds.
    pub mean_sojourn: f64,
    pub emp_pi0: f64,
    #[serde(rename = "emp_piK")]
    pub emp_pi_k: f64,
    /// Admitted packets per second of measured time.
    pub emp_lambda_e: f64,
    pub half_width: HalfWidths,
    pub offered: u64,
    pub accepted: u64,
    pub dropped: u64,
    /// Admitted-in-window packets that finished service (after draining).
    pub delivered: u64,
    /// Length of the measurement window, seconds.
    pub measured_time: f64,
}

impl SimResult {
    pub(crate) fn idle() -> Self {
        SimResult {
            mean_occupancy: 0.0,
            loss_prob: 0.0,
            mean_sojourn: 0.0,
            emp_pi0: 1.0,
            emp_pi_k: 0.0,
            emp_lambda_e: 0.0,
            half_width: HalfWidths::default(),
            offered: 0,
            accepted: 0,
            dropped: 0,
            delivered: 0,
            measured_time: 0.0,
        }
    }
}

/// Two-sided 95% Student-t quantile with `BATCHES - 1` degrees of freedom.
pub(crate) fn t_quantile() -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, (BATCHES - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

/// Batch-means half-width of `values` (one value per batch).
pub(crate) fn half_width(values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    t * (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_normal_mean() {
        // far from zero the truncation is invisible
        let d = ServiceDistribution::TruncatedNormal { mean: 1.0, std: 0.1 };
        assert!((d.mean() - 1.0).abs() < 1e-15);
        // half-normal: mean = s*sqrt(2/pi)
        let h = ServiceDistribution::TruncatedNormal { mean: 0.0, std: 1.0 };
        assert!((h.mean() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn t_quantile_value() {
        assert!((t_quantile() - 2.039_513_446).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let service = ServiceDistribution::Exponential { rate: 1.0 };
        assert!(SimConfig::new(0.5, service, 3, 10_000, 1).validate().is_ok());
        assert!(SimConfig::new(0.5, service, 3, 9_999, 1).validate().is_err());
        assert!(SimConfig::new(0.5, service, 0, 10_000, 1).validate().is_err());
        let bad = ServiceDistribution::Deterministic { time: 0.0 };
        assert!(SimConfig::new(0.5, bad, 3, 10_000, 1).validate().is_err());
    }
}
