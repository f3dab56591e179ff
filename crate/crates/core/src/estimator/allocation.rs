use log::warn;
use serde::{Deserialize, Serialize};

use super::ceil_count;
use super::indicators::LevelIndicators;
use crate::error::{Error, Result};

/// Variances of the `alpha`-weighted telescoping terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDifferenceVariances {
    pub values: Vec<f64>,
}

impl WeightedDifferenceVariances {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Per-level sample counts with the implied cost and error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub samples: Vec<usize>,
    pub cost: f64,
    pub error: f64,
}

impl Allocation {
    pub fn from_counts(samples: Vec<usize>, variances: &[f64], work: &[f64]) -> Self {
        let cost = samples.iter().zip(work).map(|(&m, &w)| m as f64 * w).sum();
        let error = estimator_error(variances, &samples);
        Self { samples, cost, error }
    }
}

/// Allocation target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Tolerance(f64),
    Budget(f64),
}

/// `V[alpha_l q_l - alpha_{l-1} q_{l-1}]` per term. Negative estimates from
/// noisy covariances are clamped to zero.
pub fn weighted_variances(ind: &LevelIndicators, alpha: &[f64]) -> Result<WeightedDifferenceVariances> {
    if alpha.len() != ind.num_levels() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} levels",
            alpha.len(),
            ind.num_levels()
        )));
    }
    let values = (0..alpha.len())
        .map(|l| {
            let v = if l == 0 {
                alpha[0] * alpha[0] * ind.fine_variance[0]
            } else {
                alpha[l] * alpha[l] * ind.fine_variance[l] + alpha[l - 1] * alpha[l - 1] * ind.coarse_variance[l]
                    - 2.0 * alpha[l] * alpha[l - 1] * ind.covariance[l]
            };
            if v < 0.0 {
                if v < -1e-12 * (ind.fine_variance[l] + ind.coarse_variance[l]) {
                    warn!("negative weighted variance {v:.3e} on level {l} clamped to zero");
                }
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(WeightedDifferenceVariances { values })
}

/// Root mean square sampling error `sqrt(sum_l s_l / M_l)`.
pub fn estimator_error(variances: &[f64], samples: &[usize]) -> f64 {
    variances
        .iter()
        .zip(samples)
        .map(|(&v, &m)| if v == 0.0 { 0.0 } else { v / m as f64 })
        .sum::<f64>()
        .sqrt()
}

fn check_inputs(variances: &[f64], work: &[f64]) -> Result<()> {
    if variances.is_empty() || variances.len() != work.len() {
        return Err(Error::InvalidArgument(format!(
            "{} variances for {} work entries",
            variances.len(),
            work.len()
        )));
    }
    if let Some(l) = work.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument(format!("work on level {l} must be positive")));
    }
    if let Some(l) = variances.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "variance on level {l} must be non-negative"
        )));
    }
    Ok(())
}

/// Cheapest allocation reaching `estimator_error <= tolerance`.
pub fn allocate_for_tolerance(variances: &[f64], work: &[f64], tolerance: f64) -> Result<Allocation> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    check_inputs(variances, work)?;
    let sum: f64 = variances.iter().zip(work).map(|(v, w)| (v * w).sqrt()).sum();
    let samples = variances
        .iter()
        .zip(work)
        .map(|(v, w)| ceil_count((v / w).sqrt() * sum / (tolerance * tolerance)).max(1))
        .collect();
    Ok(Allocation::from_counts(samples, variances, work))
}

/// Smallest-error allocation spending the budget (up to ceil slack).
pub fn allocate_for_budget(variances: &[f64], work: &[f64], budget: f64) -> Result<Allocation> {
    check_inputs(variances, work)?;
    let minimum: f64 = work.iter().sum();
    if !(budget >= minimum * (1.0 - 1e-12)) {
        return Err(Error::Budget { given: budget, minimum });
    }
    let sum: f64 = variances.iter().zip(work).map(|(v, w)| (v * w).sqrt()).sum();
    let samples = if sum == 0.0 {
        vec![1; work.len()]
    } else {
        variances
            .iter()
            .zip(work)
            .map(|(v, w)| ceil_count(budget * (v / w).sqrt() / sum).max(1))
            .collect()
    };
    Ok(Allocation::from_counts(samples, variances, work))
}

/// Re-solve the allocation while keeping every sample that is already done.
///
/// Levels whose optimal count would drop below the done count are pinned at
/// the done count. Their error contribution (or cost) is removed from the
/// objective and the remaining levels are re-optimized, until no pinned level
/// changes.
pub fn reoptimize_with_floor(
    done: &[usize],
    variances: &[f64],
    work: &[f64],
    objective: Objective,
) -> Result<Allocation> {
    check_inputs(variances, work)?;
    if done.len() != variances.len() {
        return Err(Error::InvalidArgument(
            "done counts and variances disagree in length".into(),
        ));
    }
    let n = done.len();
    let mut fixed = vec![false; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&l| !fixed[l]).collect();
        let mut target: Vec<usize> = done.to_vec();
        if !free.is_empty() {
            let v: Vec<f64> = free.iter().map(|&l| variances[l]).collect();
            let w: Vec<f64> = free.iter().map(|&l| work[l]).collect();
            let sub = match objective {
                Objective::Tolerance(tau) => {
                    let spent: f64 = (0..n)
                        .filter(|&l| fixed[l] && variances[l] > 0.0)
                        .map(|l| variances[l] / done[l].max(1) as f64)
                        .sum();
                    let residual = tau * tau - spent;
                    if residual <= 0.0 {
                        return Ok(Allocation::from_counts(done.to_vec(), variances, work));
                    }
                    allocate_for_tolerance(&v, &w, residual.sqrt())?
                }
                Objective::Budget(budget) => {
                    let spent: f64 = (0..n).filter(|&l| fixed[l]).map(|l| done[l] as f64 * work[l]).sum();
                    let residual = budget - spent;
                    let minimum: f64 = w.iter().sum();
                    if residual < minimum {
                        // no room to re-balance: keep what exists, top up empty levels
                        let samples = done.iter().map(|&m| m.max(1)).collect();
                        return Ok(Allocation::from_counts(samples, variances, work));
                    }
                    allocate_for_budget(&v, &w, residual)?
                }
            };
            for (k, &l) in free.iter().enumerate() {
                target[l] = sub.samples[k];
            }
        }
        let newly: Vec<usize> = free.iter().copied().filter(|&l| target[l] < done[l]).collect();
        if newly.is_empty() {
            return Ok(Allocation::from_counts(target, variances, work));
        }
        for l in newly {
            fixed[l] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_variance_examples() {
        let ind = LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(weighted_variances(&ind, &[1.0, 1.0]).unwrap().values[1], 0.0);

        let ind = LevelIndicators::from_moments(vec![4.0], vec![0.0], vec![1.0]).unwrap();
        assert_eq!(weighted_variances(&ind, &[0.5]).unwrap().values[0], 1.0);

        let ind = LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(weighted_variances(&ind, &[1.0, 1.0]).unwrap().values[1], 2.0);
    }

    #[test]
    fn error_examples() {
        assert!((estimator_error(&[1.0, 0.25], &[200, 50]) - 0.1).abs() < 1e-15);
        assert_eq!(estimator_error(&[0.0, 0.0], &[1, 1]), 0.0);
        assert!((estimator_error(&[1.0], &[100]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn tolerance_examples() {
        let a = allocate_for_tolerance(&[1.0, 0.25], &[1.0, 4.0], 0.1).unwrap();
        assert_eq!(a.samples, vec![200, 50]);
        assert!(a.error <= 0.1 + 1e-15);
        assert_eq!(
            allocate_for_tolerance(&[0.0, 0.0], &[1.0, 4.0], 0.1).unwrap().samples,
            vec![1, 1]
        );
        assert_eq!(allocate_for_tolerance(&[1.0], &[1.0], 0.1).unwrap().samples, vec![100]);
        assert!(allocate_for_tolerance(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn budget_examples() {
        let a = allocate_for_budget(&[4.0, 1.0], &[1.0, 4.0], 100.0).unwrap();
        assert_eq!(a.samples, vec![50, 13]);
        assert_eq!(a.cost, 102.0);
        assert_eq!(
            allocate_for_budget(&[1.0, 1.0], &[3.0, 3.0], 6.0).unwrap().samples,
            vec![1, 1]
        );
        let z = allocate_for_budget(&[1.0, 0.0], &[1.0, 4.0], 12.0).unwrap();
        assert_eq!(z.samples, vec![12, 1]);
        match allocate_for_budget(&[1.0, 1.0], &[1.0, 4.0], 3.0) {
            Err(Error::Budget { minimum, .. }) => assert_eq!(minimum, 5.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn floor_is_identity_when_inactive() {
        let v = [1.0, 0.25];
        let w = [1.0, 4.0];
        let a = reoptimize_with_floor(&[10, 5], &v, &w, Objective::Tolerance(0.1)).unwrap();
        assert_eq!(a.samples, vec![200, 50]);
    }

    #[test]
    fn floor_returns_done_when_tolerance_met() {
        let v = [1.0, 0.25];
        let w = [1.0, 4.0];
        let a = reoptimize_with_floor(&[1000, 100], &v, &w, Objective::Tolerance(0.1)).unwrap();
        assert_eq!(a.samples, vec![1000, 100]);
    }

    #[test]
    fn floor_pins_oversampled_level_and_resolves_rest() {
        let v = [1.0, 0.16, 0.01];
        let w = [1.0, 16.0, 256.0];
        let tau = 0.05;
        let done = [2000, 1, 1];
        let a = reoptimize_with_floor(&done, &v, &w, Objective::Tolerance(tau)).unwrap();
        assert_eq!(a.samples[0], 2000);
        assert!(a.error <= tau * (1.0 + 1e-12));
        // brute force: cheapest (M1, M2) meeting the residual tolerance
        let residual = tau * tau - v[0] / 2000.0;
        let mut best = f64::INFINITY;
        for m1 in 1..=2000usize {
            let rem = residual - v[1] / m1 as f64;
            if rem <= 0.0 {
                continue;
            }
            let m2 = (v[2] / rem).ceil().max(1.0);
            best = best.min(m1 as f64 * w[1] + m2 * w[2]);
        }
        let cost = a.samples[1] as f64 * w[1] + a.samples[2] as f64 * w[2];
        assert!(cost <= best + w[1] + w[2], "cost {cost} vs brute force {best}");
    }

    #[test]
    fn budget_floor_keeps_counts() {
        let v = [1.0, 0.25];
        let w = [1.0, 4.0];
        let a = reoptimize_with_floor(&[90, 1], &v, &w, Objective::Budget(100.0)).unwrap();
        assert_eq!(a.samples[0], 90);
        assert!(a.samples[1] >= 1);
    }
}
