//! Monotone piecewise-linear fit with a turn-angle penalty.
//!
//! Run with `cargo run --release --example implicit_knots`.

use queue_kpi::estimators::{fit_implicit, CurveLoss, ImplicitConfig};
use queue_kpi::queue::{self, LinkTraffic};

fn main() -> queue_kpi::Result<()> {
    let k = 16;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 1..=300 {
        let rho = i as f64 * 0.005;
        x.push(queue::featurize(&LinkTraffic::new(rho, 1.0, k))?.rho_e);
        y.push(queue::mean_occupancy(rho, k)?);
    }
    for (alpha, loss) in [(0.0, CurveLoss::Mse), (1e-5, CurveLoss::Mse), (1e-2, CurveLoss::Mse), (1e-5, CurveLoss::Mape)] {
        let cfg = ImplicitConfig { alpha, loss, ..ImplicitConfig::default() };
        let fit = fit_implicit(&x, &y, &cfg)?;
        fit.model.check_constraints()?;
        println!(
            "alpha {alpha:<7} {loss:?}: objective {:.3e} after {} iterations (converged: {})",
            fit.objective, fit.iterations, fit.converged
        );
    }
    let fit = fit_implicit(&x, &y, &ImplicitConfig::default())?;
    println!("knots (normalized):");
    for (a, b) in fit.model.a.iter().zip(&fit.model.b) {
        println!("  {a:.4} {b:.4}");
    }
    Ok(())
}
