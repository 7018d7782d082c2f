//! Fit several models on a simulated train split and score them on the rest.
//!
//! Run with `cargo run --release --example benchmark_report`.

use queue_kpi::dataset::{split, SplitMode};
use queue_kpi::estimators::ModelSpec;
use queue_kpi::eval::{benchmark, filter_zero_targets};
use queue_kpi::sim::{generate_dataset, GridSpec, ServiceKind, Topology};

fn main() -> queue_kpi::Result<()> {
    let grid = GridSpec {
        loads: (1..=20).map(|i| i as f64 * 0.06).collect(),
        buffers: vec![32],
        services: vec![ServiceKind::Exponential, ServiceKind::TruncatedNormal { cv: 0.5 }],
        topologies: vec![Topology::Single, Topology::Chain { links: 3 }, Topology::Star { leaves: 3 }],
        replications: 3,
        ..GridSpec::single_queues(vec![], vec![])
    };
    let (data, _) = filter_zero_targets(&generate_dataset(&grid, 42, None)?);
    let (train, test) = split(&data, (0.8, 0.2), SplitMode::Iid, 42)?;
    let specs = ["linear", "exp-poly:3", "exp-poly:8", "mm1k:32", "bernstein:32", "implicit:12:0.00001"]
        .iter()
        .map(|s| s.parse::<ModelSpec>())
        .collect::<queue_kpi::Result<Vec<_>>>()?;
    let bench = benchmark(&specs, &train, &test, Some(4))?;
    print!("{}", bench.report.to_text());
    Ok(())
}
