use serde::{Deserialize, Serialize};

use super::ceil_count;
use super::indicators::{mean, TermSamples};
use crate::error::{Error, Result};

/// Telescoping estimate `alpha_0 mean(q_0) + sum_l mean(alpha_l q_l - alpha_{l-1} q_{l-1})`.
///
/// With `alpha = 1` this is the classic multi-level estimator.
pub fn of_mlmc_expectation(terms: &[TermSamples], alpha: &[f64]) -> Result<f64> {
    if terms.len() != alpha.len() || terms.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} terms for {} coefficients",
            terms.len(),
            alpha.len()
        )));
    }
    let mut total = 0.0;
    for (l, t) in terms.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::Estimator {
                level: l,
                reason: "no valid samples".into(),
            });
        }
        if l == 0 {
            total += alpha[0] * mean(&t.fine);
        } else {
            if t.coarse.len() != t.fine.len() {
                return Err(Error::Estimator {
                    level: l,
                    reason: "fine and coarse sample counts differ".into(),
                });
            }
            total += mean(&t.weighted_differences(alpha[l], alpha[l - 1]));
        }
    }
    Ok(total)
}

/// Plain Monte Carlo sample count and cost for the error reached by a
/// multi-level run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCostEstimate {
    /// `ceil(sigma_L / eps)`, the form printed with the speedup formula.
    pub samples_as_published: usize,
    pub work_as_published: f64,
    /// `ceil(sigma_L^2 / eps^2)`, consistent with the Monte Carlo error law.
    pub samples_variance: usize,
    pub work_variance: f64,
}

pub fn mc_cost_estimate(sigma_fine: f64, error: f64, work_fine: f64) -> Result<McCostEstimate> {
    if !(error > 0.0) {
        return Err(Error::InvalidArgument(format!("error must be positive, got {error}")));
    }
    let ratio = sigma_fine.abs() / error;
    let published = ceil_count(ratio).max(1);
    let variance = ceil_count(ratio * ratio).max(1);
    Ok(McCostEstimate {
        samples_as_published: published,
        work_as_published: published as f64 * work_fine,
        samples_variance: variance,
        work_variance: variance as f64 * work_fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_mean() {
        let t = TermSamples::from_values(0, vec![1.0, 2.0, 3.0], vec![]);
        assert_eq!(of_mlmc_expectation(&[t], &[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn telescoping_by_hand() {
        let t0 = TermSamples::from_values(0, vec![4.0, 6.0], vec![]);
        let t1 = TermSamples::from_values(1, vec![1.5, 2.5], vec![1.0, 2.0]);
        assert_eq!(of_mlmc_expectation(&[t0, t1], &[1.0, 1.0]).unwrap(), 5.5);
    }

    #[test]
    fn constant_field_is_exact() {
        let c = 3.25;
        let t0 = TermSamples::from_values(0, vec![c; 4], vec![]);
        let t1 = TermSamples::from_values(1, vec![c; 3], vec![c; 3]);
        let t2 = TermSamples::from_values(2, vec![c; 2], vec![c; 2]);
        let e = of_mlmc_expectation(&[t0, t1, t2], &[0.3, -1.7, 1.0]).unwrap();
        assert!((e - c).abs() < 1e-14);
    }

    #[test]
    fn empty_term_is_an_error() {
        let t0 = TermSamples::from_values(0, vec![1.0], vec![]);
        let t1 = TermSamples::new(1);
        assert!(matches!(
            of_mlmc_expectation(&[t0, t1], &[1.0, 1.0]),
            Err(Error::Estimator { level: 1, .. })
        ));
    }

    #[test]
    fn mc_cost_examples() {
        let m = mc_cost_estimate(2.0, 0.01, 1.0).unwrap();
        assert_eq!(m.samples_as_published, 200);
        assert_eq!(m.samples_variance, 40_000);
        assert_eq!(mc_cost_estimate(0.0, 0.01, 1.0).unwrap().samples_as_published, 1);
        assert_eq!(mc_cost_estimate(0.5, 0.5, 3.0).unwrap().samples_as_published, 1);
    }
}
