//! Occupancy as a function of effective utilization: exp-poly, Bernstein and
//! M/M/1/K-shaped bases fit to the same points.
//!
//! Run with `cargo run --release --example curve_fits`.

use queue_kpi::estimators::{fit_basis, fit_exp_poly, BasisKind};
use queue_kpi::eval::mape;
use queue_kpi::queue::{self, LinkTraffic};

fn main() -> queue_kpi::Result<()> {
    let k = 32;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 1..=400 {
        let rho = i as f64 * 0.004;
        x.push(queue::featurize(&LinkTraffic::new(rho, 1.0, k))?.rho_e);
        y.push(queue::mean_occupancy(rho, k)?);
    }

    for degree in [3, 8] {
        let m = fit_exp_poly(&x, &y, degree)?;
        let pred: Vec<f64> = x.iter().map(|v| m.predict(*v)).collect();
        println!("exp-poly degree {degree}: MAPE {:.3}%", mape(&pred, &y)?);
    }
    for kind in [BasisKind::Mm1k, BasisKind::Bernstein] {
        let m = fit_basis(kind, k, &x, &y)?;
        let pred = x.iter().map(|v| m.predict(*v)).collect::<queue_kpi::Result<Vec<f64>>>()?;
        println!("{kind} basis, K = {k}: MAPE {:.3}%", mape(&pred, &y)?);
    }
    Ok(())
}
