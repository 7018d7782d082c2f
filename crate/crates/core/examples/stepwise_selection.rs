//! Forward stepwise selection over expanded analytic features.
//!
//! Run with `cargo run --release --example stepwise_selection`.

use queue_kpi::estimators::{build_candidate_features, forward_stepwise, StepwiseConfig};
use queue_kpi::eval::{featurize_samples, filter_zero_targets};
use queue_kpi::queue::BaseFeature;
use queue_kpi::sim::{generate_dataset, GridSpec};

fn main() -> queue_kpi::Result<()> {
    let grid = GridSpec {
        replications: 3,
        ..GridSpec::single_queues((1..=28).map(|i| i as f64 * 0.05).collect(), vec![8, 16, 32])
    };
    let (data, _) = filter_zero_targets(&generate_dataset(&grid, 3, None)?);
    let (rows, y) = featurize_samples(&data)?;
    let candidates = build_candidate_features(&BaseFeature::ALL, &rows)?;
    println!("{} candidates over {} links", candidates.exprs.len(), rows.len());

    let res = forward_stepwise(&candidates, &y, &StepwiseConfig { max_features: 5, ..Default::default() })?;
    println!("intercept only: {:.3}% validation MAPE", res.baseline);
    for (name, score) in res.selected.iter().zip(&res.scores) {
        println!("+ {name:<16} {score:.3}%");
    }
    Ok(())
}
