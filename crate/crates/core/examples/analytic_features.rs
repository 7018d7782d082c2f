//! Closed-form M/M/1/K quantities and the feature vector of a link.
//!
//! Run with `cargo run --example analytic_features`.

use queue_kpi::queue::{self, LinkTraffic};

fn main() -> queue_kpi::Result<()> {
    let k = 32;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "rho", "pi0", "piK", "rho_e", "L", "Se");
    for rho in [0.2, 0.5, 0.8, 0.95, 1.0, 1.2, 2.0] {
        let f = queue::featurize(&LinkTraffic::new(rho, 1.0, k))?;
        println!(
            "{rho:>6.2} {:>10.4e} {:>10.4e} {:>10.6} {:>10.4} {:>10.4}",
            f.pi0, f.pi_k, f.rho_e, f.l, f.se
        );
    }

    // links are usually described by capacity and packet size instead of mu
    let link = LinkTraffic::from_capacity(800.0, 10e6, 12_000.0, k);
    let f = queue::featurize(&link)?;
    let occupancy = queue::mean_occupancy(f.rho, k)?;
    let delay = queue::occupancy_to_delay(occupancy, 12_000.0, 10e6)?;
    println!("\n10 Mb/s link, 1500 B packets, 800 pkt/s: rho {:.3}, {occupancy:.3} packets, {:.3} ms", f.rho, 1e3 * delay);
    Ok(())
}
