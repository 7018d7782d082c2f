mod common;

use common::rng;
use queue_kpi::estimators::{
    basis_value, build_candidate_features, fit_basis, fit_exp_poly, fit_implicit, fit_linear,
    forward_stepwise, BasisKind, ImplicitConfig, ModelDocument, ModelSpec, StepwiseConfig,
};
use queue_kpi::queue::{self, BaseFeature, LinkTraffic, QueueFeatures};
use rand::Rng;

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

#[test]
fn bernstein_reproduces_polynomials() {
    let mut r = rng(3);
    for k in 1..=10u32 {
        for _ in 0..5 {
            let degree = r.random_range(0..=k);
            let coef: Vec<f64> = (0..=degree).map(|_| r.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..200).map(|_| r.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| coef.iter().rev().fold(0.0, |acc, c| acc * v + c)).collect();
            let m = fit_basis(BasisKind::Bernstein, k, &x, &y).unwrap();
            let rms = (x.iter().zip(&y).map(|(a, b)| (m.predict(*a).unwrap() - b).powi(2)).sum::<f64>()
                / x.len() as f64)
                .sqrt();
            assert!(rms < 1e-8, "K={k} degree={degree}: rms {rms}");
        }
    }
}

#[test]
fn bernstein_partition_of_unity() {
    let mut r = rng(4);
    for _ in 0..100 {
        let x: f64 = r.random_range(0.0..=1.0);
        let s: f64 = (0..=32).map(|n| basis_value(BasisKind::Bernstein, n, 32, x).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mm1k_basis_is_normalized_and_spans_the_occupancy_curve() {
    for n in 0..=8u32 {
        let x = n as f64 / (n as f64 + 1.0);
        assert!((basis_value(BasisKind::Mm1k, n, 8, x).unwrap() - 1.0).abs() < 1e-12);
    }
    // occupancy as a function of rho_e is smooth; a K=16 expansion should track it
    let x = grid(400);
    let y: Vec<f64> = x.iter().map(|r| queue::mean_occupancy(*r, 8).unwrap()).collect();
    let m = fit_basis(BasisKind::Mm1k, 16, &x, &y).unwrap();
    let worst = x.iter().zip(&y).map(|(a, b)| (m.predict(*a).unwrap() - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn linear_recovers_planted_coefficients() {
    let mut r = rng(5);
    let n = 500;
    let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let truth = [1.5, -0.25, 3.0, 0.0];
    let y: Vec<f64> = (0..n).map(|i| 0.75 + (0..4).map(|j| truth[j] * cols[j][i]).sum::<f64>()).collect();
    let names: Vec<String> = (0..4).map(|j| format!("x{j}")).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let m = fit_linear(&names, &refs, &y).unwrap();
    for (w, t) in m.weights.iter().zip(truth) {
        assert!((w - t).abs() < 1e-8);
    }
    assert!((m.intercept - 0.75).abs() < 1e-8);
}

#[test]
fn exp_poly_recovers_planted_exponent() {
    let x = grid(50);
    let y: Vec<f64> = x.iter().map(|v| (2.0 * v).exp()).collect();
    let m = fit_exp_poly(&x, &y, 1).unwrap();
    assert!(m.coefficients[0].abs() < 1e-10 && (m.coefficients[1] - 2.0).abs() < 1e-10, "{m:?}");
}

#[test]
fn implicit_fits_the_diagonal() {
    let x = grid(101);
    let fit = fit_implicit(&x, &x, &ImplicitConfig::default()).unwrap();
    let mse = x.iter().map(|v| (fit.model.predict(*v) - v).powi(2)).sum::<f64>() / x.len() as f64;
    assert!(mse < 1e-10, "{mse}");
    fit.model.check_constraints().unwrap();
    assert_eq!(fit.model.parameter_count(), 24);
}

fn synthetic_rows(n: usize) -> (Vec<QueueFeatures>, Vec<f64>) {
    let mut r = rng(8);
    let rows: Vec<QueueFeatures> = (0..n)
        .map(|_| queue::featurize(&LinkTraffic::new(r.random_range(0.05..1.5), 1.0, 32)).unwrap())
        .collect();
    let y = rows.iter().map(|f| queue::mean_occupancy(f.rho, 32).unwrap()).collect();
    (rows, y)
}

#[test]
fn stepwise_finds_the_exact_feature() {
    let (rows, _) = synthetic_rows(400);
    // a target that is exactly affine in L
    let y: Vec<f64> = rows.iter().map(|f| 0.5 + 2.0 * f.l).collect();
    let m = build_candidate_features(&BaseFeature::ALL, &rows).unwrap();
    let res = forward_stepwise(&m, &y, &StepwiseConfig::default()).unwrap();
    assert_eq!(res.selected[0], "L");
    assert!(res.scores[0] < 1e-8);
    assert!(res.scores[0] < res.baseline);
}

#[test]
fn model_documents_roundtrip_for_every_kind() {
    let (rows, y) = synthetic_rows(300);
    for spec in ["linear", "exp-poly:8", "mm1k:32", "bernstein:32", "implicit:12:0.00001"] {
        let spec: ModelSpec = spec.parse().unwrap();
        let (model, report) = spec.fit(&rows, &y).unwrap();
        let doc = ModelDocument::new(model.clone(), &report);
        let back = ModelDocument::from_toml(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(back.model, model, "{spec}");
        assert_eq!(back.model.predict_batch(&rows).unwrap(), model.predict_batch(&rows).unwrap());
    }
}

#[test]
fn parameter_counts() {
    let (rows, y) = synthetic_rows(200);
    let count = |s: &str| s.parse::<ModelSpec>().unwrap().fit(&rows, &y).unwrap().0.parameter_count();
    assert_eq!(count("linear"), 5);
    assert_eq!(count("exp-poly:3"), 4);
    assert_eq!(count("bernstein:32"), 33);
    assert_eq!(count("mm1k:32"), 33);
    assert_eq!(count("implicit:12:0"), 24);
}
