//! Simulate one finite queue and compare with the stationary law.
//!
//! Run with `cargo run --release --example simulate_queue`.

use queue_kpi::queue;
use queue_kpi::sim::{simulate_queue, ServiceDistribution, SimConfig};

fn main() -> queue_kpi::Result<()> {
    let (rho, k) = (0.8, 10);
    let services = [
        ("exponential", ServiceDistribution::Exponential { rate: 1.0 }),
        ("deterministic", ServiceDistribution::Deterministic { time: 1.0 }),
        ("truncated normal", ServiceDistribution::TruncatedNormal { mean: 1.0, std: 0.5 }),
    ];
    println!("M/M/1/{k} at rho {rho}: L = {:.4}, piK = {:.4}", queue::mean_occupancy(rho, k)?, queue::pi_k(rho, k)?);
    for (name, service) in services {
        // rho is lambda / mu, and every service law here has mean 1 or close to it
        let lambda = rho * service.rate();
        let res = simulate_queue(&SimConfig::new(lambda, service, k, 500_000, 1))?;
        println!(
            "{name:>17}: L = {:.4} +- {:.4}, loss = {:.4}, W = {:.4}, lambda_e W = {:.4}",
            res.mean_occupancy,
            res.half_width.mean_occupancy,
            res.loss_prob,
            res.mean_sojourn,
            res.emp_lambda_e * res.mean_sojourn
        );
    }
    Ok(())
}
