//! Simulate a small grid of queues and networks and save it as a dataset.
//!
//! Run with `cargo run --release --example generate_dataset -- [out_dir]`.

use queue_kpi::dataset;
use queue_kpi::sim::{generate_dataset, GridSpec, ServiceKind, Topology};

fn main() -> queue_kpi::Result<()> {
    let grid = GridSpec {
        loads: vec![0.3, 0.6, 0.9, 1.2],
        buffers: vec![32],
        services: vec![ServiceKind::Exponential, ServiceKind::TruncatedNormal { cv: 0.5 }],
        topologies: vec![
            Topology::Single,
            Topology::Chain { links: 3 },
            Topology::RandomDag { links: 6, flows: 4, max_hops: 3 },
        ],
        replications: 2,
        ..GridSpec::single_queues(vec![], vec![])
    };
    let data = generate_dataset(&grid, 42, None)?;
    println!("{} runs -> {} links, {} flows", grid.runs(), data.links.len(), data.paths.len());
    for link in data.links.iter().take(5) {
        println!(
            "{:>10} lambda {:>8.1} K {} occupancy {:.3}",
            link.link_id, link.lambda, link.k, link.observed_occupancy
        );
    }
    if let Some(out) = std::env::args().nth(1) {
        dataset::save(&data, &out)?;
        println!("saved to {out}");
    }
    Ok(())
}
