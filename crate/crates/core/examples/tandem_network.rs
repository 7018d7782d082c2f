//! A three-hop path sharing its middle link with cross traffic.
//!
//! Run with `cargo run --release --example tandem_network`.

use queue_kpi::queue::{self, LinkTraffic};
use queue_kpi::sim::{simulate_tandem, FlowSpec, LinkSpec, ServiceDistribution, TandemConfig};

fn main() -> queue_kpi::Result<()> {
    let service = ServiceDistribution::Exponential { rate: 1.0 };
    let links = vec![LinkSpec { service, k: 16 }; 3];
    let flows = vec![
        FlowSpec { path: vec![0, 1, 2], rate: 0.5 },
        FlowSpec { path: vec![1], rate: 0.3 },
    ];
    let cfg = TandemConfig::new(links, flows, 400_000, 7);
    let offered = cfg.offered_rates();
    let res = simulate_tandem(&cfg)?;

    println!("link  offered  simulated L  M/M/1/K L at offered load");
    for (i, (link, lambda)) in res.links.iter().zip(&offered).enumerate() {
        let f = queue::featurize(&LinkTraffic::new(*lambda, 1.0, 16))?;
        println!(
            "{i:>4} {lambda:>8.2} {:>12.4} {:>12.4}",
            link.mean_occupancy,
            queue::mean_occupancy(f.rho, 16)?
        );
    }
    for (i, flow) in res.flows.iter().enumerate() {
        println!("flow {i}: mean delay {:.4} +- {:.4} over {} packets", flow.mean_delay, flow.half_width, flow.delivered);
    }
    Ok(())
}
