//! End-to-end delay of each flow as the sum of per-link delays predicted from
//! occupancy.
//!
//! Run with `cargo run --release --example path_delay`.

use queue_kpi::estimators::ModelSpec;
use queue_kpi::eval::{featurize_samples, filter_zero_targets, predict_path_delays};
use queue_kpi::sim::{generate_dataset, GridSpec, ServiceKind, Topology};

fn main() -> queue_kpi::Result<()> {
    let grid = GridSpec {
        loads: vec![0.3, 0.6, 0.9],
        buffers: vec![32],
        services: vec![ServiceKind::Exponential],
        topologies: vec![Topology::Chain { links: 4 }],
        measured_events: 50_000,
        ..GridSpec::single_queues(vec![], vec![])
    };
    let (data, _) = filter_zero_targets(&generate_dataset(&grid, 9, None)?);
    let (rows, y) = featurize_samples(&data)?;
    let (model, _) = "exp-poly:8".parse::<ModelSpec>()?.fit(&rows, &y)?;
    let predicted = predict_path_delays(&model, &data)?;
    println!("{:>8} {:>5} {:>12} {:>12}", "flow", "hops", "observed ms", "predicted ms");
    for (flow, p) in data.paths.iter().zip(&predicted) {
        println!(
            "{:>8} {:>5} {:>12.4} {:>12.4}",
            flow.flow_id,
            flow.link_ids.len(),
            1e3 * flow.observed_end_to_end_delay,
            1e3 * p
        );
    }
    Ok(())
}
