use crate::error::Result;
use crate::estimator::{reoptimize_with_floor, Allocation, Objective, TermSamples};

const MAX_ROUNDS: usize = 100;

/// Per-sample spread `sqrt(m4 - s^4)` of the squared deviations of `values`,
/// so that the standard deviation of the sample variance is about
/// `spread / sqrt(M)`. Falls back to the Gaussian value `sqrt(2) s^2` for
/// fewer than four values.
pub fn variance_spread(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let s2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if n < 4 {
        return std::f64::consts::SQRT_2 * s2;
    }
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    (m4 - s2 * s2).max(0.0).sqrt()
}

/// Spread of the weighted differences of every term for coefficients `alpha`.
pub fn weighted_spreads(terms: &[TermSamples], alpha: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| {
            let l = t.level;
            let prev = if l == 0 { 0.0 } else { alpha[l - 1] };
            variance_spread(&t.weighted_differences(alpha[l], prev))
        })
        .collect()
}

/// Raise an allocation until the error target still holds with every
/// variance replaced by `v_l + s * spread_l / sqrt(M_l)`.
///
/// The inflated variances depend on the counts, so the floored re-allocation
/// is repeated until the counts stop changing. Counts never decrease. `s = 0`
/// or zero spreads return `allocation` unchanged. Budget objectives are left
/// untouched because inflation cannot buy confidence without extra budget.
pub fn inflate_for_confidence(
    allocation: &Allocation,
    variances: &[f64],
    spreads: &[f64],
    work: &[f64],
    objective: Objective,
    sigmas: f64,
) -> Result<Allocation> {
    if sigmas == 0.0 || spreads.iter().all(|k| *k == 0.0) || matches!(objective, Objective::Budget(_)) {
        return Ok(allocation.clone());
    }
    let mut samples = allocation.samples.clone();
    for _ in 0..MAX_ROUNDS {
        let inflated: Vec<f64> = variances
            .iter()
            .zip(spreads)
            .zip(&samples)
            .map(|((v, k), &m)| v + sigmas * k / (m.max(1) as f64).sqrt())
            .collect();
        let next = reoptimize_with_floor(&samples, &inflated, work, objective)?;
        if next.samples == samples {
            return Ok(Allocation::from_counts(samples, variances, work));
        }
        samples = next.samples;
    }
    Ok(Allocation::from_counts(samples, variances, work))
}
