//! Reference computations shared by the integration tests. Nothing here calls
//! the closed forms under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Stationary law of the M/M/1/K chain from its generator matrix.
///
/// Solves `pi Q = 0` with the last balance equation replaced by `sum pi = 1`.
pub fn birth_death_stationary(lambda: f64, mu: f64, k: usize) -> Vec<f64> {
    let n = k + 1;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            q[(i, i + 1)] = lambda;
            q[(i, i)] -= lambda;
        }
        if i > 0 {
            q[(i, i - 1)] = mu;
            q[(i, i)] -= mu;
        }
    }
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a.lu().solve(&b).expect("generator system is nonsingular");
    pi.iter().copied().collect()
}

pub fn oracle_mean(pi: &[f64]) -> f64 {
    pi.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
}

/// Relative error, falling back to absolute error near zero.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
