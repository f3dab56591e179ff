use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Valid paired observations of one telescoping term.
///
/// For term `0` only `fine` is populated (the level-0 values). For `l >= 1`,
/// `fine[i]` and `coarse[i]` are `q_l` and `q_{l-1}` of the same random input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermSamples {
    pub level: usize,
    pub fine: Vec<f64>,
    pub coarse: Vec<f64>,
    /// Cost of each sample of the term (pair cost for `l >= 1`).
    pub work: Vec<f64>,
    /// Cost of the fine-side evaluation alone.
    pub fine_work: Vec<f64>,
}

impl TermSamples {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            ..Default::default()
        }
    }

    /// Term samples with unit work, handy for tests and examples.
    pub fn from_values(level: usize, fine: Vec<f64>, coarse: Vec<f64>) -> Self {
        let n = fine.len();
        Self {
            level,
            fine,
            coarse,
            work: vec![1.0; n],
            fine_work: vec![1.0; n],
        }
    }

    pub fn push(&mut self, fine: f64, coarse: Option<f64>, work: f64, fine_work: f64) {
        self.fine.push(fine);
        if let Some(c) = coarse {
            self.coarse.push(c);
        }
        self.work.push(work);
        self.fine_work.push(fine_work);
    }

    pub fn len(&self) -> usize {
        self.fine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fine.is_empty()
    }

    /// Values of `alpha_fine * q_l - alpha_coarse * q_{l-1}` (or `alpha_fine * q_0`).
    pub fn weighted_differences(&self, alpha_fine: f64, alpha_coarse: f64) -> Vec<f64> {
        if self.level == 0 {
            self.fine.iter().map(|f| alpha_fine * f).collect()
        } else {
            self.fine
                .iter()
                .zip(&self.coarse)
                .map(|(f, c)| alpha_fine * f - alpha_coarse * c)
                .collect()
        }
    }
}

/// Empirical level statistics steering coefficients and allocation.
///
/// Per-term moments (`fine_variance`, `coarse_variance`, `covariance`) come
/// from the pairs of that term, so that the weighted-difference variance of a
/// term is exactly the sample variance of its weighted differences. The
/// per-level `variance` pools every observation of `q_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIndicators {
    /// Pooled `V[q_l]`.
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
    /// `V[q_l]` measured on the pairs of term `l`.
    pub fine_variance: Vec<f64>,
    /// `V[q_{l-1}]` measured on the pairs of term `l` (zero for `l = 0`).
    pub coarse_variance: Vec<f64>,
    /// `Cov[q_l, q_{l-1}]`; entry `0` is unused and zero.
    pub covariance: Vec<f64>,
    /// `V[q_l - q_{l-1}]`, or `V[q_0]` for term `0`.
    pub difference_variance: Vec<f64>,
    pub difference_variance_se: Vec<f64>,
    /// Per-sample spread `m4 - s^4` of the squared deviations of each term.
    pub kurtosis: Vec<Option<f64>>,
    /// Mean cost of one sample of each term.
    pub work: Vec<f64>,
    /// Mean cost of one evaluation on each level.
    pub level_work: Vec<f64>,
    pub samples: Vec<usize>,
    /// Terms whose difference moments could not be measured and must be inferred.
    pub inferred: Vec<bool>,
}

impl LevelIndicators {
    /// Indicators from per-level variances, consecutive covariances and term
    /// costs. `covariance[0]` is ignored.
    pub fn from_moments(variance: Vec<f64>, covariance: Vec<f64>, work: Vec<f64>) -> Result<Self> {
        let n = variance.len();
        if n == 0 || covariance.len() != n || work.len() != n {
            return Err(Error::InvalidArgument(format!(
                "indicator dimensions disagree: {} variances, {} covariances, {} costs",
                n,
                covariance.len(),
                work.len()
            )));
        }
        if let Some(l) = variance.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::Indicator {
                level: l,
                reason: format!("negative variance {}", variance[l]),
            });
        }
        for l in 1..n {
            let bound = (variance[l] * variance[l - 1]).sqrt();
            if covariance[l].abs() > bound * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::Indicator {
                    level: l,
                    reason: format!("covariance {} violates Cauchy-Schwarz bound {}", covariance[l], bound),
                });
            }
        }
        let mut cov = covariance;
        cov[0] = 0.0;
        let mut coarse = vec![0.0; n];
        coarse[1..n].copy_from_slice(&variance[..n - 1]);
        let difference_variance = (0..n)
            .map(|l| {
                if l == 0 {
                    variance[0]
                } else {
                    variance[l] + variance[l - 1] - 2.0 * cov[l]
                }
            })
            .collect();
        Ok(Self {
            fine_variance: variance.clone(),
            variance_se: vec![0.0; n],
            coarse_variance: coarse,
            covariance: cov,
            difference_variance,
            difference_variance_se: vec![0.0; n],
            kurtosis: vec![None; n],
            level_work: work.clone(),
            work,
            samples: vec![0; n],
            inferred: vec![false; n],
            variance,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.variance.len()
    }

    pub fn finest(&self) -> usize {
        self.variance.len() - 1
    }

    /// Correlation `Cor[q_l, q_{l-1}]` measured on term `l`.
    pub fn correlation(&self, level: usize) -> Option<f64> {
        if level == 0 {
            return None;
        }
        let denom = (self.fine_variance[level] * self.coarse_variance[level]).sqrt();
        (denom > 0.0).then(|| self.covariance[level] / denom)
    }

    /// Replace the difference variance of term `level`, keeping the per-term
    /// variances and shifting the covariance so the moments stay consistent.
    pub fn set_difference_variance(&mut self, level: usize, value: f64) {
        if level == 0 {
            return;
        }
        let value = value.max(0.0);
        let fv = self.fine_variance[level];
        let cv = self.coarse_variance[level];
        let bound = (fv * cv).sqrt();
        let cov = (0.5 * (fv + cv - value)).clamp(-bound, bound);
        self.covariance[level] = cov;
        self.difference_variance[level] = fv + cv - 2.0 * cov;
    }
}

/// Estimate level indicators from the valid samples of every term.
///
/// Moments use the unbiased `n - 1` normalization. Terms with a single sample
/// are flagged in `inferred`; their difference variance is provisionally set
/// to the uncorrelated value `V[q_l] + V[q_{l-1}]` until a decay fit replaces
/// it.
pub fn estimate_indicators(terms: &[TermSamples]) -> Result<LevelIndicators> {
    let n_levels = terms.len();
    if n_levels == 0 {
        return Err(Error::InvalidArgument("no levels supplied".into()));
    }
    for (l, t) in terms.iter().enumerate() {
        if t.level != l {
            return Err(Error::InvalidArgument(format!("term {l} carries level {}", t.level)));
        }
        if t.is_empty() {
            return Err(Error::Indicator {
                level: l,
                reason: "no valid samples".into(),
            });
        }
        if l > 0 && t.coarse.len() != t.fine.len() {
            return Err(Error::Indicator {
                level: l,
                reason: "fine and coarse sample counts differ".into(),
            });
        }
    }

    // pooled per-level variance over every observation of q_l
    let mut pooled: Vec<Option<(f64, usize)>> = (0..n_levels)
        .map(|l| {
            let mut values: Vec<f64> = terms[l].fine.clone();
            if l + 1 < n_levels {
                values.extend_from_slice(&terms[l + 1].coarse);
            }
            sample_variance(&values).map(|v| (v, values.len()))
        })
        .collect();
    fill_missing_from_neighbours(&mut pooled).ok_or(Error::Indicator {
        level: 0,
        reason: "at least two observations on some level are required".into(),
    })?;
    let variance: Vec<f64> = pooled.iter().map(|p| p.unwrap().0).collect();
    let variance_se: Vec<f64> = pooled
        .iter()
        .map(|p| {
            let (v, n) = p.unwrap();
            if n >= 2 {
                v * (2.0 / (n as f64 - 1.0)).sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let mut ind = LevelIndicators {
        variance: variance.clone(),
        variance_se,
        fine_variance: vec![0.0; n_levels],
        coarse_variance: vec![0.0; n_levels],
        covariance: vec![0.0; n_levels],
        difference_variance: vec![0.0; n_levels],
        difference_variance_se: vec![0.0; n_levels],
        kurtosis: vec![None; n_levels],
        work: terms.iter().map(|t| mean(&t.work)).collect(),
        level_work: terms.iter().map(|t| mean(&t.fine_work)).collect(),
        samples: terms.iter().map(|t| t.len()).collect(),
        inferred: vec![false; n_levels],
    };

    for (l, t) in terms.iter().enumerate() {
        let n = t.len();
        if n < 2 {
            ind.inferred[l] = true;
            ind.fine_variance[l] = variance[l];
            if l == 0 {
                ind.difference_variance[0] = variance[0];
            } else {
                ind.coarse_variance[l] = variance[l - 1];
                ind.covariance[l] = 0.0;
                ind.difference_variance[l] = variance[l] + variance[l - 1];
            }
            continue;
        }
        ind.fine_variance[l] = sample_variance(&t.fine).unwrap();
        let diffs = if l == 0 {
            t.fine.clone()
        } else {
            ind.coarse_variance[l] = sample_variance(&t.coarse).unwrap();
            ind.covariance[l] = sample_covariance(&t.fine, &t.coarse);
            t.weighted_differences(1.0, 1.0)
        };
        let d = sample_variance(&diffs).unwrap();
        ind.difference_variance[l] = d;
        let m4 = central_moment(&diffs, 4);
        if n >= 4 {
            let spread = (m4 - d * d).max(0.0);
            ind.kurtosis[l] = Some(spread);
            let nf = n as f64;
            let var_of_var = (m4 - (nf - 3.0) / (nf - 1.0) * d * d).max(0.0) / nf;
            ind.difference_variance_se[l] = var_of_var.sqrt();
        } else {
            ind.difference_variance_se[l] = d * (2.0 / (n as f64 - 1.0)).sqrt();
        }
    }

    // level work for levels observed only as the coarse side is not needed:
    // every level appears as the fine side of its own term.
    Ok(ind)
}

fn fill_missing_from_neighbours(values: &mut [Option<(f64, usize)>]) -> Option<()> {
    let first = values.iter().position(|v| v.is_some())?;
    for l in (0..first).rev() {
        values[l] = values[l + 1].map(|(v, _)| (v, 0));
    }
    for l in first + 1..values.len() {
        if values[l].is_none() {
            values[l] = values[l - 1].map(|(v, _)| (v, 0));
        }
    }
    Some(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub(crate) fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    Some(ss / (values.len() as f64 - 1.0))
}

fn sample_covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    s / (a.len() as f64 - 1.0)
}

pub(crate) fn central_moment(values: &[f64], order: i32) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m).powi(order)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_pair_moments() {
        let t0 = TermSamples::from_values(0, vec![1.0, 3.0, 5.0, 7.0], vec![]);
        let t1 = TermSamples::from_values(1, vec![2.0, 4.0, 6.0], vec![1.0, 3.0, 5.0]);
        let ind = estimate_indicators(&[t0, t1]).unwrap();
        assert_eq!(ind.difference_variance[1], 0.0);
        assert_eq!(ind.covariance[1], 4.0);
        assert_eq!(ind.fine_variance[1], 4.0);
        assert_eq!(ind.coarse_variance[1], 4.0);
        assert!(!ind.inferred[1]);
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let t0 = TermSamples::from_values(0, vec![2.0; 5], vec![]);
        let t1 = TermSamples::from_values(1, vec![2.0; 3], vec![2.0; 3]);
        let ind = estimate_indicators(&[t0, t1]).unwrap();
        assert!(ind.variance.iter().all(|v| *v == 0.0));
        assert!(ind.difference_variance.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_finest_sample_is_flagged() {
        let t0 = TermSamples::from_values(0, vec![0.1, -0.4, 0.9, 1.3], vec![]);
        let t1 = TermSamples::from_values(1, vec![0.5, 0.2, -0.3], vec![0.4, 0.1, -0.2]);
        let t2 = TermSamples::from_values(2, vec![0.7], vec![0.6]);
        let ind = estimate_indicators(&[t0, t1, t2]).unwrap();
        assert_eq!(ind.inferred, vec![false, false, true]);
        assert_eq!(ind.samples, vec![4, 3, 1]);
        // finest variance borrowed from the level below
        assert_eq!(ind.variance[2], ind.variance[1]);
    }

    #[test]
    fn empty_level_is_an_error() {
        let t0 = TermSamples::from_values(0, vec![1.0, 2.0], vec![]);
        let t1 = TermSamples::new(1);
        match estimate_indicators(&[t0, t1]) {
            Err(Error::Indicator { level, .. }) => assert_eq!(level, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn set_difference_variance_keeps_consistency() {
        let mut ind = LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 0.5], vec![1.0, 2.0]).unwrap();
        assert!((ind.difference_variance[1] - 1.0).abs() < 1e-15);
        ind.set_difference_variance(1, 0.2);
        assert!((ind.covariance[1] - 0.9).abs() < 1e-15);
        assert!((ind.difference_variance[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn from_moments_rejects_cauchy_schwarz_violation() {
        assert!(LevelIndicators::from_moments(vec![1.0, 1.0], vec![0.0, 1.5], vec![1.0, 2.0]).is_err());
    }
}
