use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-norm least-squares solution and the numerical rank it was found at.
#[derive(Debug, Clone)]
pub(crate) struct Lstsq {
    pub coef: Vec<f64>,
    pub rank: usize,
}

/// Solve `min ||A x - y||` for a tall or square `A` given column by column.
///
/// Householder QR reduces the problem to the `p x p` factor `R`; an SVD of `R`
/// then reveals the rank and yields the minimum-norm solution when columns are
/// dependent. Singular values below `max(m, p) * eps * s_max` count as zero.
pub(crate) fn lstsq(columns: &[&[f64]], y: &[f64]) -> Result<Lstsq> {
    let m = y.len();
    let p = columns.len();
    if m == 0 || p == 0 {
        return Err(Error::Fit("empty design".into()));
    }
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::Fit("design columns and target differ in length".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Fit("non-finite entry in design or target".into()));
    }
    let a = DMatrix::from_fn(m, p, |i, j| columns[j][i]);
    let mut b = DVector::from_column_slice(y);

    let (core, rhs) = if m >= p {
        let qr = a.qr();
        qr.q_tr_mul(&mut b);
        (qr.r(), b.rows(0, p).into_owned())
    } else {
        (a, b)
    };
    let svd = core.svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = (m.max(p) as f64) * f64::EPSILON * s_max;
    let rank = svd.rank(tol);
    let coef = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))?;
    Ok(Lstsq {
        coef: coef.iter().copied().collect(),
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_system() {
        let x1 = [1.0, 2.0, 3.0, 4.0];
        let x2 = [1.0, 0.0, 1.0, 0.0];
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let sol = lstsq(&[&x1, &x2], &y).unwrap();
        assert_eq!(sol.rank, 2);
        assert!((sol.coef[0] - 2.0).abs() < 1e-12);
        assert!((sol.coef[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_gets_min_norm() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
        let sol = lstsq(&[&x, &x], &y).unwrap();
        assert_eq!(sol.rank, 1);
        assert!((sol.coef[0] - 2.0).abs() < 1e-10);
        assert!((sol.coef[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_nan() {
        assert!(lstsq(&[&[1.0, f64::NAN]], &[1.0, 2.0]).is_err());
        assert!(lstsq(&[], &[1.0]).is_err());
    }
}
