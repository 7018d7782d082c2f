//! Per-link queue occupancy and end-to-end latency estimation from M/M/1/K
//! features.
//!
//! - [`queue`]: closed-form M/M/1/K quantities and the feature vector of a link.
//! - [`sim`]: discrete-event simulator for single queues and feed-forward
//!   networks, and a grid-driven dataset generator.
//! - [`dataset`]: link/flow records, their CSV + TOML layout, splits, and import
//!   of flattened external tables.
//! - [`estimators`]: linear regression over engineered features, curve fits of
//!   occupancy against effective utilization, and stepwise feature selection.
//! - [`eval`]: error metrics, path-delay assembly and model benchmarks.
//! - [`cli`]: the `queue-kpi` command line.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod eval;
mod linalg;
pub mod queue;
pub mod sim;

pub use error::{Error, Result};
