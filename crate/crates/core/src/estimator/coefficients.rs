use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::indicators::LevelIndicators;
use super::tridiagonal::solve_symmetric_tridiagonal;
use crate::error::{Error, Result};

/// Condition number above which the coefficient system is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Control-variate coefficients `alpha_0..alpha_L` with `alpha_L = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub alpha: Vec<f64>,
    /// Set when the optimal system could not be solved and `alpha = 1` was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl CoefficientVector {
    /// Classic MLMC coefficients.
    pub fn unit(num_levels: usize) -> Self {
        Self {
            alpha: vec![1.0; num_levels],
            fallback: None,
        }
    }

    pub fn new(mut alpha: Vec<f64>) -> Result<Self> {
        match alpha.last_mut() {
            None => Err(Error::InvalidArgument("empty coefficient vector".into())),
            Some(last) => {
                if *last != 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "finest coefficient must be 1, got {last}"
                    )));
                }
                *last = 1.0;
                Ok(Self { alpha, fallback: None })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }
}

/// Assemble the tridiagonal normal equations for `alpha_0..alpha_{L-1}`.
fn assemble(ind: &LevelIndicators) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let finest = ind.finest();
    let w = &ind.work;
    let diag: Vec<f64> = (0..finest)
        .map(|k| ind.fine_variance[k] * w[k] + ind.coarse_variance[k + 1] * w[k + 1])
        .collect();
    let off: Vec<f64> = (0..finest.saturating_sub(1))
        .map(|k| -ind.covariance[k + 1] * w[k + 1])
        .collect();
    let mut rhs = vec![0.0; finest];
    rhs[finest - 1] = ind.covariance[finest] * w[finest];
    (diag, off, rhs)
}

/// Solve the coefficient system, failing on singular or ill-conditioned input.
///
/// The stationarity conditions of `sum_l W_l V[alpha_l q_l - alpha_{l-1} q_{l-1}]`
/// form a symmetric tridiagonal system with diagonal
/// `V[q_k] W_k + V[q_k] W_{k+1}`, off-diagonal `-Cov[q_{k+1}, q_k] W_{k+1}` and
/// right-hand side `Cov[q_L, q_{L-1}] W_L` in the last row. `ind.work` holds the
/// cost attributed to each term.
pub fn solve_coefficient_system(ind: &LevelIndicators) -> Result<CoefficientVector> {
    let n = ind.num_levels();
    if n == 1 {
        return Ok(CoefficientVector::unit(1));
    }
    if let Some(l) = (0..n - 1).find(|&l| !(ind.fine_variance[l] > 0.0) && !(ind.coarse_variance[l + 1] > 0.0)) {
        return Err(Error::Numerical(format!("level {l} has zero variance")));
    }
    let (diag, off, rhs) = assemble(ind);
    let cond = scaled_condition(&diag, &off);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Numerical(format!(
            "coefficient system condition number {cond:.3e} exceeds {MAX_CONDITION:e}"
        )));
    }
    let mut alpha = solve_symmetric_tridiagonal(&diag, &off, &rhs)?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("non-finite coefficient".into()));
    }
    alpha.push(1.0);
    Ok(CoefficientVector { alpha, fallback: None })
}

/// Optimal coefficients, degrading to `alpha = 1` with a warning when the
/// system cannot be solved reliably.
pub fn optimal_coefficients(ind: &LevelIndicators) -> CoefficientVector {
    match solve_coefficient_system(ind) {
        Ok(c) => c,
        Err(e) => {
            warn!("optimal coefficients unavailable ({e}); using standard MLMC coefficients");
            CoefficientVector {
                alpha: vec![1.0; ind.num_levels()],
                fallback: Some(e.to_string()),
            }
        }
    }
}

/// Condition number of the Jacobi-scaled matrix, so that the disparate level
/// costs alone do not count as ill-conditioning.
fn scaled_condition(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return f64::INFINITY;
    }
    let s: Vec<f64> = diag.iter().map(|d| d.sqrt().recip()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if i + 1 == j {
            off[i] * s[i] * s[j]
        } else if j + 1 == i {
            off[j] * s[i] * s[j]
        } else {
            0.0
        }
    });
    let eig = m.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Work-weighted variance `sum_l W_l V[alpha_l q_l - alpha_{l-1} q_{l-1}]`,
/// the quantity minimized by the optimal coefficients.
pub fn variance_cost(ind: &LevelIndicators, alpha: &[f64]) -> f64 {
    (0..ind.num_levels())
        .map(|l| {
            let v = if l == 0 {
                alpha[0] * alpha[0] * ind.fine_variance[0]
            } else {
                alpha[l] * alpha[l] * ind.fine_variance[l] + alpha[l - 1] * alpha[l - 1] * ind.coarse_variance[l]
                    - 2.0 * alpha[l] * alpha[l - 1] * ind.covariance[l]
            };
            v * ind.work[l]
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn two_level_example() {
        let ind = LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 0.8], vec![1.0, 16.0]).unwrap();
        let c = optimal_coefficients(&ind);
        assert!((c.alpha[0] - 16.0 / 17.0 * 0.8).abs() < 1e-14);
        assert_eq!(c.alpha[1], 1.0);
        assert!(c.fallback.is_none());
    }

    #[test]
    fn perfect_correlation_free_coarse_level() {
        let ind = LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 1.0], vec![1e-300, 1.0]).unwrap();
        let c = optimal_coefficients(&ind);
        assert!((c.alpha[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_level_example_against_dense_solve() {
        let ind = LevelIndicators::from_moments(vec![1.0; 3], vec![0.0, 0.5, 0.5], vec![1.0, 16.0, 256.0]).unwrap();
        let c = optimal_coefficients(&ind);
        let a = DMatrix::from_row_slice(2, 2, &[17.0, -8.0, -8.0, 272.0]);
        let oracle = a.lu().solve(&DVector::from_vec(vec![0.0, 128.0])).unwrap();
        assert!((c.alpha[0] - oracle[0]).abs() < 1e-14);
        assert!((c.alpha[1] - oracle[1]).abs() < 1e-14);
        assert!((c.alpha[1] - 0.47719).abs() < 5e-6);
        assert!((c.alpha[0] - 0.22456).abs() < 5e-6);
    }

    #[test]
    fn single_level_is_unit() {
        let ind = LevelIndicators::from_moments(vec![2.0], vec![0.0], vec![1.0]).unwrap();
        assert_eq!(optimal_coefficients(&ind).alpha, vec![1.0]);
    }

    #[test]
    fn degenerate_system_falls_back() {
        let ind = LevelIndicators::from_moments(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 4.0]).unwrap();
        let c = optimal_coefficients(&ind);
        assert_eq!(c.alpha, vec![1.0; 3]);
        assert!(c.fallback.is_some());
        assert!(solve_coefficient_system(&ind).is_err());
    }

    #[test]
    fn finest_coefficient_must_be_one() {
        assert!(CoefficientVector::new(vec![0.3, 0.9]).is_err());
        assert!(CoefficientVector::new(vec![0.3, 1.0]).is_ok());
    }

    fn indicators_strategy() -> impl Strategy<Value = LevelIndicators> {
        (2usize..=7).prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..5.0, n),
                prop::collection::vec(-0.95f64..0.99, n),
                prop::collection::vec(1.0f64..8.0, n),
            )
                .prop_map(|(var, cor, growth)| {
                    let cov: Vec<f64> = (0..var.len())
                        .map(|l| {
                            if l == 0 {
                                0.0
                            } else {
                                cor[l] * (var[l] * var[l - 1]).sqrt()
                            }
                        })
                        .collect();
                    let mut work = vec![1.0];
                    for l in 1..var.len() {
                        work.push(work[l - 1] * growth[l]);
                    }
                    LevelIndicators::from_moments(var, cov, work).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn two_level_closed_form(v0 in 0.1f64..4.0, v1 in 0.1f64..4.0, cor in -0.99f64..0.99, w1 in 1.0f64..100.0) {
            let cov = cor * (v0 * v1).sqrt();
            let ind = LevelIndicators::from_moments(vec![v0, v1], vec![0.0, cov], vec![1.0, w1]).unwrap();
            let a = optimal_coefficients(&ind).alpha[0];
            let closed = w1 / (w1 + 1.0) * cov / v0;
            prop_assert!((a - closed).abs() <= 1e-12 * closed.abs().max(1e-12));
        }

        #[test]
        fn optimal_beats_unit_and_perturbations(ind in indicators_strategy(), dirs in prop::collection::vec(-1.0f64..1.0, 7 * 50)) {
            let c = optimal_coefficients(&ind);
            prop_assume!(c.fallback.is_none());
            let best = variance_cost(&ind, &c.alpha);
            let slack = 1e-10 * best.abs().max(1.0);
            prop_assert!(best <= variance_cost(&ind, &vec![1.0; ind.num_levels()]) + slack);
            let n = ind.num_levels();
            for trial in dirs.chunks(7).take(50) {
                let mut alpha = c.alpha.clone();
                for l in 0..n - 1 {
                    alpha[l] += 0.1 * trial[l];
                }
                prop_assert!(best <= variance_cost(&ind, &alpha) + slack);
            }
        }
    }
}
