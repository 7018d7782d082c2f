use std::collections::VecDeque;

use rand_distr::{Distribution, Exp};

use super::monitor::{batch_of, LinkMonitor};
use super::{rng_for, t_quantile, SimConfig, SimResult};
use crate::error::{Error, Result};

/// Simulate a single FIFO queue with Poisson arrivals.
///
/// The measurement window opens at the first arrival after `warmup_events`
/// and closes at the arrival following the last measured one. Packets admitted
/// inside the window are followed until they leave, so `accepted == delivered`.
pub fn simulate_queue(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    if cfg.lambda == 0.0 {
        return Ok(SimResult::idle());
    }
    let mut rng = rng_for(cfg.seed, cfg.stream);
    let interarrival = Exp::new(cfg.lambda).map_err(|e| Error::SimConfig(e.to_string()))?;
    let service = cfg.service.sampler()?;
    let mut monitor = LinkMonitor::new(cfg.k);
    // (arrival time, batch if admitted inside the window)
    let mut queue: VecDeque<(f64, Option<usize>)> = VecDeque::with_capacity(cfg.k as usize);

    let last = cfg.warmup_events + cfg.measured_events;
    let mut seen: u64 = 0;
    let mut next_arrival = interarrival.sample(&mut rng);
    let mut next_departure = f64::INFINITY;
    let mut open = true;

    loop {
        if open && next_arrival <= next_departure {
            let t = next_arrival;
            if seen == last {
                monitor.close(t);
                open = false;
                continue;
            }
            if seen >= cfg.warmup_events {
                let b = batch_of(seen - cfg.warmup_events, cfg.measured_events);
                if monitor.current_batch() != Some(b) {
                    monitor.open_batch(t, b);
                }
            }
            if monitor.arrival(t) {
                queue.push_back((t, monitor.current_batch()));
                if queue.len() == 1 {
                    next_departure = t + service.sample(&mut rng);
                }
            }
            seen += 1;
            next_arrival = t + interarrival.sample(&mut rng);
        } else if next_departure.is_finite() {
            let t = next_departure;
            let (arrived, batch) = queue.pop_front().expect("departure from empty queue");
            monitor.departure(t);
            if let Some(b) = batch {
                monitor.record_sojourn(b, t - arrived);
            }
            next_departure = if queue.is_empty() {
                f64::INFINITY
            } else {
                t + service.sample(&mut rng)
            };
        } else {
            break;
        }
    }
    debug_assert_eq!(monitor.len(), 0);
    Ok(monitor.result(t_quantile()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ServiceDistribution;

    fn mm1k(lambda: f64, mu: f64, k: u32, events: u64, seed: u64) -> SimConfig {
        SimConfig::new(lambda, ServiceDistribution::Exponential { rate: mu }, k, events, seed)
    }

    #[test]
    fn zero_arrivals() {
        let r = simulate_queue(&mm1k(0.0, 1.0, 4, 10_000, 3)).unwrap();
        assert_eq!(r.mean_occupancy, 0.0);
        assert_eq!(r.loss_prob, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = mm1k(0.9, 1.0, 8, 20_000, 11);
        let a = simulate_queue(&cfg).unwrap();
        let b = simulate_queue(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_queue(&SimConfig { stream: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn counts_are_conserved() {
        let r = simulate_queue(&mm1k(1.5, 1.0, 3, 50_000, 5)).unwrap();
        assert_eq!(r.offered, 50_000);
        assert_eq!(r.offered, r.accepted + r.dropped);
        assert_eq!(r.accepted, r.delivered);
        assert!((0.0..=1.0).contains(&r.loss_prob));
        assert!(r.mean_occupancy >= 0.0 && r.mean_occupancy <= 3.0);
    }

    #[test]
    fn one_slot_overload_loses_most() {
        // K=1, lambda=10 mu: piK = 10/11
        let r = simulate_queue(&mm1k(10.0, 1.0, 1, 20_000, 9)).unwrap();
        assert!(r.loss_prob > 0.5);
    }

    #[test]
    fn deterministic_service_never_overlaps_below_one() {
        // D service 0.5 s and K=1: every admitted packet stays exactly 0.5 s
        let cfg = SimConfig::new(
            1.0,
            ServiceDistribution::Deterministic { time: 0.5 },
            1,
            10_000,
            2,
        );
        let r = simulate_queue(&cfg).unwrap();
        assert!((r.mean_sojourn - 0.5).abs() < 1e-12);
    }
}
