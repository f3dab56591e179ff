use crate::error::{Error, Result};

/// Solve `A x = rhs` for a symmetric tridiagonal `A` with the Thomas algorithm.
///
/// `off[k]` couples unknowns `k` and `k + 1`, so `off.len() == diag.len() - 1`.
/// A zero or sign-changing pivot is reported as a numerical error, which for
/// the coefficient system means it is not positive definite.
pub fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || rhs.len() != n || off.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal dimensions disagree: diag {}, off {}, rhs {}",
            n,
            off.len(),
            rhs.len()
        )));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    for k in 0..n {
        if k > 0 {
            pivot = diag[k] - off[k - 1] * c[k - 1];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Numerical(format!("non-positive pivot {pivot} at row {k}")));
        }
        if k + 1 < n {
            c[k] = off[k] / pivot;
        }
        d[k] = if k == 0 {
            rhs[0] / pivot
        } else {
            (rhs[k] - off[k - 1] * d[k - 1]) / pivot
        };
    }
    let mut x = d;
    for k in (0..n - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn two_by_two_example() {
        let x = solve_symmetric_tridiagonal(&[17.0, 272.0], &[-8.0], &[0.0, 128.0]).unwrap();
        let oracle = dense(&[17.0, 272.0], &[-8.0])
            .lu()
            .solve(&DVector::from_vec(vec![0.0, 128.0]))
            .unwrap();
        assert!((x[0] - oracle[0]).abs() < 1e-15);
        assert!((x[1] - oracle[1]).abs() < 1e-15);
        assert!((x[1] - 0.47719).abs() < 1e-5);
        assert!((x[0] - 0.22456).abs() < 1e-5);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        assert!(solve_symmetric_tridiagonal(&[1.0, 1.0], &[2.0], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_dense_solve(
            n in 1usize..9,
            seed in prop::collection::vec((0.1f64..10.0, -1.0f64..1.0, -5.0f64..5.0), 9),
        ) {
            // diagonally dominant, hence positive definite
            let off: Vec<f64> = (0..n.saturating_sub(1)).map(|k| seed[k].1 * seed[k].0.min(seed[k + 1].0) * 0.49).collect();
            let diag: Vec<f64> = (0..n).map(|k| seed[k].0).collect();
            let rhs: Vec<f64> = (0..n).map(|k| seed[k].2).collect();
            let x = solve_symmetric_tridiagonal(&diag, &off, &rhs).unwrap();
            let oracle = dense(&diag, &off).lu().solve(&DVector::from_vec(rhs)).unwrap();
            for k in 0..n {
                prop_assert!((x[k] - oracle[k]).abs() <= 1e-12 * oracle[k].abs().max(1e-3));
            }
        }
    }
}
