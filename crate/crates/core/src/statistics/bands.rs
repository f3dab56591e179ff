use serde::{Deserialize, Serialize};

use super::percentile;
use crate::error::{Error, Result};

/// Time series of one telescoping term: level-0 traces, or coupled fine and
/// coarse traces of a difference term. All traces share one time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelSeries {
    pub fine: Vec<Vec<f64>>,
    pub coarse: Vec<Vec<f64>>,
}

/// Pointwise multi-level mean with median and 50% / 90% percentile bands.
///
/// The mean is the telescoping estimate. The median and bands are
/// single-level percentiles of the finest populated level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub lower50: Vec<f64>,
    pub upper50: Vec<f64>,
    pub lower90: Vec<f64>,
    pub upper90: Vec<f64>,
    /// Level whose samples give the percentiles.
    pub percentile_level: usize,
    pub percentile_samples: usize,
}

impl Bands {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,mean,median,p25,p75,p5,p95\n");
        for k in 0..self.time.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.time[k],
                self.mean[k],
                self.median[k],
                self.lower50[k],
                self.upper50[k],
                self.lower90[k],
                self.upper90[k]
            ));
        }
        s
    }
}

/// Pointwise telescoping mean of traces with `nt` points.
pub fn multilevel_mean(levels: &[LevelSeries], alpha: &[f64], nt: usize) -> Result<Vec<f64>> {
    if levels.is_empty() || levels.len() != alpha.len() {
        return Err(Error::InvalidArgument(format!(
            "{} levels for {} coefficients",
            levels.len(),
            alpha.len()
        )));
    }
    for (l, s) in levels.iter().enumerate() {
        if s.fine.iter().chain(&s.coarse).any(|v| v.len() != nt) {
            return Err(Error::InvalidArgument(format!(
                "level {l} has traces off the {nt}-point grid"
            )));
        }
        if l > 0 && s.coarse.len() != s.fine.len() {
            return Err(Error::InvalidArgument(format!(
                "level {l}: fine and coarse trace counts differ"
            )));
        }
        if s.fine.is_empty() {
            return Err(Error::InvalidArgument(format!("level {l} has no traces")));
        }
    }
    let mut mean = vec![0.0; nt];
    for (l, s) in levels.iter().enumerate() {
        let m = s.fine.len() as f64;
        for k in 0..nt {
            let mut acc = 0.0;
            for (i, f) in s.fine.iter().enumerate() {
                acc += alpha[l] * f[k];
                if l > 0 {
                    acc -= alpha[l - 1] * s.coarse[i][k];
                }
            }
            mean[k] += acc / m;
        }
    }
    Ok(mean)
}

pub fn confidence_bands(levels: &[LevelSeries], alpha: &[f64], time: &[f64]) -> Result<Bands> {
    let nt = time.len();
    let mean = multilevel_mean(levels, alpha, nt)?;
    let finest = levels.len() - 1;
    if levels[finest].fine.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "percentile bands need two or more traces on level {finest}"
        )));
    }
    let traces = &levels[finest].fine;
    let mut out = Bands {
        time: time.to_vec(),
        mean,
        median: Vec::with_capacity(nt),
        lower50: Vec::with_capacity(nt),
        upper50: Vec::with_capacity(nt),
        lower90: Vec::with_capacity(nt),
        upper90: Vec::with_capacity(nt),
        percentile_level: finest,
        percentile_samples: traces.len(),
    };
    let mut column = vec![0.0; traces.len()];
    for k in 0..nt {
        for (c, t) in column.iter_mut().zip(traces) {
            *c = t[k];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        out.median.push(percentile(&column, 50.0));
        out.lower50.push(percentile(&column, 25.0));
        out.upper50.push(percentile(&column, 75.0));
        out.lower90.push(percentile(&column, 5.0));
        out.upper90.push(percentile(&column, 95.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn single(traces: Vec<Vec<f64>>) -> Vec<LevelSeries> {
        vec![LevelSeries {
            fine: traces,
            coarse: vec![],
        }]
    }

    #[test]
    fn identical_samples_give_zero_width() {
        let b = confidence_bands(&single(vec![vec![2.0, 3.0]; 5]), &[1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(b.lower90, b.upper90);
        assert_eq!(b.median, vec![2.0, 3.0]);
        assert_eq!(b.mean, vec![2.0, 3.0]);
    }

    #[test]
    fn symmetric_pair_has_zero_median() {
        let b = confidence_bands(&single(vec![vec![-1.0], vec![1.0]]), &[1.0], &[0.0]).unwrap();
        assert_eq!(b.median, vec![0.0]);
    }

    #[test]
    fn normal_ninety_percent_band() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let traces: Vec<Vec<f64>> = (0..10_000).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let b = confidence_bands(&single(traces), &[1.0], &[0.0]).unwrap();
        assert!((b.lower90[0] + 1.645).abs() < 0.05 && (b.upper90[0] - 1.645).abs() < 0.05);
    }

    #[test]
    fn telescoping_mean_uses_the_coefficients() {
        let levels = vec![
            LevelSeries {
                fine: vec![vec![1.0], vec![3.0]],
                coarse: vec![],
            },
            LevelSeries {
                fine: vec![vec![2.5], vec![3.5]],
                coarse: vec![vec![2.0], vec![3.0]],
            },
        ];
        let b = confidence_bands(&levels, &[0.5, 1.0], &[0.0]).unwrap();
        assert!((b.mean[0] - (0.5 * 2.0 + (3.0 - 0.5 * 2.5))).abs() < 1e-15);
        assert_eq!(b.percentile_level, 1);
    }
}
