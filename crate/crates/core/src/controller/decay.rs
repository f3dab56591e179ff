use log::warn;
use serde::{Deserialize, Serialize};

use crate::estimator::LevelIndicators;

/// Smallest relative standard error admitted in the fit weights.
const MIN_RELATIVE_SE: f64 = 1e-12;

/// Log-linear decay fit `ln D_l = intercept + slope * l` of the difference
/// variances, with the values it implies on every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub intercept: f64,
    pub slope: f64,
    /// Fitted, blended or extrapolated value per entry of the input; `None`
    /// where neither a measurement nor a fit is available.
    pub values: Vec<Option<f64>>,
    pub standard_errors: Vec<Option<f64>>,
    /// Number of measurements entering the fit.
    pub measurements: usize,
}

/// Weighted least-squares fit of `ln D` against the level index.
///
/// `measurements[k]` is `(level, value, standard_error)` or `None` when the
/// level needs an inferred value. Weights are inverse squared relative
/// standard errors. Measured levels receive the inverse-variance blend of
/// measurement and fit, missing ones the extrapolated fit. With fewer than two
/// usable measurements the input is returned unchanged.
pub fn fit_decay(measurements: &[(usize, Option<(f64, f64)>)]) -> DecayFit {
    let usable: Vec<(f64, f64, f64)> = measurements
        .iter()
        .filter_map(|(l, m)| {
            m.filter(|(v, _)| *v > 0.0 && v.is_finite())
                .map(|(v, se)| (*l as f64, v, se))
        })
        .collect();
    let passthrough = || DecayFit {
        intercept: f64::NAN,
        slope: f64::NAN,
        values: measurements.iter().map(|(_, m)| m.map(|(v, _)| v)).collect(),
        standard_errors: measurements.iter().map(|(_, m)| m.map(|(_, se)| se)).collect(),
        measurements: usable.len(),
    };
    if usable.len() < 2 {
        warn!(
            "decay fit needs at least two measured levels, found {}; using raw estimates",
            usable.len()
        );
        return passthrough();
    }

    // normal equations of the weighted fit in log space
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, v, se) in &usable {
        let rel = (se / v).max(MIN_RELATIVE_SE);
        let w = 1.0 / (rel * rel);
        let y = v.ln();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * y;
        t1 += w * x * y;
    }
    // centre the abscissa so the 2x2 system stays well conditioned
    let xm = s1 / s0;
    let sxx = s2 - s1 * xm;
    if !(sxx > 0.0) {
        warn!("decay fit is degenerate; using raw estimates");
        return passthrough();
    }
    let slope = (t1 - xm * t0) / sxx;
    let ym = t0 / s0;
    let intercept = ym - slope * xm;
    // variance of the fitted log value at x, with the weights as known precisions
    let log_var = |x: f64| 1.0 / s0 + (x - xm).powi(2) / sxx;

    let mut values = Vec::with_capacity(measurements.len());
    let mut standard_errors = Vec::with_capacity(measurements.len());
    for (l, m) in measurements {
        let x = *l as f64;
        let fit = (intercept + slope * x).exp();
        let fit_var = fit * fit * log_var(x);
        match m {
            Some((v, se)) if *v > 0.0 && v.is_finite() => {
                let mvar = se * se;
                if mvar == 0.0 {
                    values.push(Some(*v));
                    standard_errors.push(Some(0.0));
                } else if fit_var == 0.0 {
                    values.push(Some(fit));
                    standard_errors.push(Some(0.0));
                } else {
                    let p = 1.0 / mvar + 1.0 / fit_var;
                    values.push(Some((v / mvar + fit / fit_var) / p));
                    standard_errors.push(Some(p.recip().sqrt()));
                }
            }
            Some((v, se)) => {
                values.push(Some(*v));
                standard_errors.push(Some(*se));
            }
            None => {
                values.push(Some(fit));
                standard_errors.push(Some(fit_var.sqrt()));
            }
        }
    }
    DecayFit {
        intercept,
        slope,
        values,
        standard_errors,
        measurements: usable.len(),
    }
}

/// Replace the difference variances of terms `1..=L` by their decay-fit
/// values. Returns the levels still flagged inferred without a fitted value.
pub fn apply_decay_fit(ind: &mut LevelIndicators) -> (Option<DecayFit>, Vec<usize>) {
    let n = ind.num_levels();
    if n < 2 {
        return (None, Vec::new());
    }
    let input: Vec<(usize, Option<(f64, f64)>)> = (1..n)
        .map(|l| {
            let m = (!ind.inferred[l]).then(|| (ind.difference_variance[l], ind.difference_variance_se[l]));
            (l, m)
        })
        .collect();
    let fit = fit_decay(&input);
    let fitted = fit.measurements >= 2;
    let mut unfitted = Vec::new();
    for (k, l) in (1..n).enumerate() {
        if ind.inferred[l] && !fitted {
            unfitted.push(l);
            continue;
        }
        if let (Some(v), Some(se)) = (fit.values[k], fit.standard_errors[k]) {
            ind.set_difference_variance(l, v);
            ind.difference_variance_se[l] = se;
        }
    }
    (fitted.then_some(fit), unfitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_geometric_decay_is_reproduced() {
        let m: Vec<_> = (1..=5).map(|l| (l, Some(((-2.0 * l as f64).exp2(), 0.0)))).collect();
        let fit = fit_decay(&m);
        for (k, (_, v)) in m.iter().enumerate() {
            let want = v.unwrap().0;
            assert!((fit.values[k].unwrap() - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn missing_level_is_extrapolated() {
        let m = vec![
            (1, Some((0.64, 0.01))),
            (2, Some((0.16, 0.0025))),
            (3, Some((0.04, 0.000625))),
            (4, None),
        ];
        let fit = fit_decay(&m);
        assert!((fit.values[3].unwrap() - 0.01).abs() < 1e-12);
        assert!((fit.slope - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_measurement_passes_through() {
        let m = vec![(1, Some((0.5, 0.1))), (2, None)];
        let fit = fit_decay(&m);
        assert_eq!(fit.values, vec![Some(0.5), None]);
        assert_eq!(fit.measurements, 1);
    }

    proptest! {
        #[test]
        fn blend_lies_between_measurement_and_fit(noise in prop::collection::vec(-0.5f64..0.5, 4)) {
            let m: Vec<_> = noise
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let v = (-(k as f64 + 1.0)).exp2() * (1.0 + e);
                    (k + 1, Some((v, 0.1 * v)))
                })
                .collect();
            let fit = fit_decay(&m);
            for (k, (l, meas)) in m.iter().enumerate() {
                let v = meas.unwrap().0;
                let f = (fit.intercept + fit.slope * *l as f64).exp();
                let b = fit.values[k].unwrap();
                prop_assert!(b >= v.min(f) * (1.0 - 1e-12) && b <= v.max(f) * (1.0 + 1e-12));
            }
        }
    }
}
