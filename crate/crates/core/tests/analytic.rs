mod common;

use common::{birth_death_stationary, oracle_mean, rel_err, rng};
use proptest::prelude::*;
use queue_kpi::queue::{self, LinkTraffic};
use rand::Rng;

#[test]
fn small_chain_by_hand() {
    // rho = 1/2, K = 2: weights 1, 1/2, 1/4 over 7/4
    let pi = birth_death_stationary(1.0, 2.0, 2);
    assert!((pi[0] - 4.0 / 7.0).abs() < 1e-15);
    assert!((queue::pi0(0.5, 2).unwrap() - 4.0 / 7.0).abs() < 1e-15);
    assert!((queue::pi_k(0.5, 2).unwrap() - 1.0 / 7.0).abs() < 1e-15);
    assert!((queue::mean_occupancy(0.5, 2).unwrap() - 4.0 / 7.0).abs() < 1e-15);
}

#[test]
fn closed_forms_match_generator_solve() {
    for &rho in &[0.05, 0.2, 0.5, 0.8, 0.95, 0.999, 1.0, 1.001, 1.2, 3.0] {
        for &k in &[1u32, 2, 5, 16, 32, 64] {
            let pi = birth_death_stationary(rho, 1.0, k as usize);
            let tol = 1e-10;
            let got = queue::state_probabilities(rho, k).unwrap();
            for (a, b) in got.iter().zip(&pi) {
                assert!((a - b).abs() < tol, "rho={rho} K={k}: {a} vs {b}");
            }
            assert!((queue::pi0(rho, k).unwrap() - pi[0]).abs() < tol);
            assert!((queue::pi_k(rho, k).unwrap() - pi[k as usize]).abs() < tol);
            let mean = oracle_mean(&pi);
            assert!(rel_err(queue::mean_occupancy(rho, k).unwrap(), mean) < 1e-9);
            // the engineered L carries an extra rho on top of the mean
            assert!(rel_err(queue::feature_l(rho, k).unwrap(), rho + mean) < 1e-9);
        }
    }
}

#[test]
fn se_matches_direct_sum() {
    let mut r = rng(7);
    for _ in 0..200 {
        let rho_e: f64 = r.random_range(0.0..1.0);
        let k: u32 = r.random_range(1..80);
        let direct: f64 = (1..=k).map(|i| i as f64 * rho_e.powi(i as i32)).sum();
        assert!(rel_err(queue::feature_se(rho_e, k).unwrap(), direct) < 1e-12);
    }
}

#[test]
fn flow_balance_over_random_inputs() {
    let mut r = rng(11);
    for _ in 0..10_000 {
        let mu: f64 = r.random_range(0.1..1e4);
        let rho: f64 = r.random_range(0.0..3.0);
        let k: u32 = r.random_range(1..128);
        let f = queue::featurize(&LinkTraffic::new(rho * mu, mu, k)).unwrap();
        let lhs = f.rho * mu * (1.0 - f.pi_k);
        let rhs = mu * (1.0 - f.pi0);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        assert!((f.rho_e - (1.0 - f.pi0)).abs() <= 1e-12);
    }
}

#[test]
fn delay_from_occupancy() {
    // 4 packets of 1500 B on 12 Mb/s
    let d = queue::occupancy_to_delay(4.0, 12_000.0, 12e6).unwrap();
    assert!((d - 4e-3).abs() < 1e-15);
    assert!(queue::occupancy_to_delay(1.0, 1.0, 0.0).is_err());
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(rho in 0.0f64..5.0, k in 1u32..200) {
        let p = queue::state_probabilities(rho, k).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn occupancy_grows_with_load(rho in 0.01f64..3.0, k in 1u32..100) {
        let a = queue::mean_occupancy(rho, k).unwrap();
        let b = queue::mean_occupancy(rho * 1.05, k).unwrap();
        prop_assert!(b >= a - 1e-12);
        prop_assert!(a <= k as f64 + 1e-12);
    }

    #[test]
    fn loss_grows_as_buffer_shrinks(rho in 0.01f64..3.0, k in 2u32..100) {
        let big = queue::pi_k(rho, k).unwrap();
        let small = queue::pi_k(rho, k - 1).unwrap();
        prop_assert!(small >= big - 1e-15);
    }
}
