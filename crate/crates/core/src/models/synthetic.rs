use rand::Rng;
use rand_distr::StandardNormal;

use super::{Model, ModelSample, TimeSeries};
use crate::error::Result;
use crate::estimator::LevelIndicators;
use crate::rng::SampleStream;

const PROFILE_POINTS: usize = 11;

/// Analytic hierarchy `q_l = X + c 2^(-s l) Z_l` with independent standard
/// normal `X, Z_0, Z_1, ...`.
///
/// `V[q_l] = 1 + c^2 4^(-s l)` and `Cov[q_l, q_{l-1}] = 1`, so the level
/// correlation is tunable through `s` and `c` and tends to one with `l`.
/// Every sample also carries a short `profile` series `X t + c 2^(-s l) Z_l t^2`
/// on `t = 0, 0.1, ..., 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticModel {
    pub decay: f64,
    pub amplitude: f64,
    pub base_work: f64,
    pub work_rate: f64,
}

impl SyntheticModel {
    pub fn new(decay: f64, amplitude: f64) -> Self {
        Self {
            decay,
            amplitude,
            base_work: 1.0,
            work_rate: 4.0,
        }
    }

    pub fn with_work(mut self, base_work: f64, work_rate: f64) -> Self {
        self.base_work = base_work;
        self.work_rate = work_rate;
        self
    }

    fn scale(&self, level: i32) -> f64 {
        self.amplitude * (-self.decay * level as f64).exp2()
    }

    /// Shared component `X`.
    pub fn common(&self, stream: &SampleStream) -> f64 {
        stream.derive_named("common").sample(StandardNormal)
    }

    /// Level-specific component `Z_l`.
    pub fn level_noise(&self, stream: &SampleStream, level: i32) -> f64 {
        stream.derive_named("level").derive(level as u64).sample(StandardNormal)
    }

    pub fn variance(&self, level: usize) -> f64 {
        1.0 + self.scale(level as i32).powi(2)
    }

    pub fn covariance(&self, _level: usize) -> f64 {
        1.0
    }

    pub fn correlation(&self, level: usize) -> f64 {
        1.0 / (self.variance(level) * self.variance(level - 1)).sqrt()
    }

    pub fn work(&self, level: usize) -> f64 {
        self.base_work * (self.work_rate * level as f64).exp2()
    }

    /// Exact moments with pair costs as term work.
    pub fn analytic_indicators(&self, num_levels: usize) -> LevelIndicators {
        let var: Vec<f64> = (0..num_levels).map(|l| self.variance(l)).collect();
        let cov: Vec<f64> = (0..num_levels).map(|l| if l == 0 { 0.0 } else { 1.0 }).collect();
        let work = (0..num_levels)
            .map(|l| {
                if l == 0 {
                    self.work(0)
                } else {
                    self.work(l) + self.work(l - 1)
                }
            })
            .collect();
        LevelIndicators::from_moments(var, cov, work).expect("analytic moments are consistent")
    }

    /// Exact `V[alpha_l q_l - alpha_{l-1} q_{l-1}]` for every term.
    pub fn analytic_weighted_variances(&self, alpha: &[f64]) -> Vec<f64> {
        (0..alpha.len())
            .map(|l| {
                if l == 0 {
                    alpha[0] * alpha[0] * self.variance(0)
                } else {
                    let (a, b) = (alpha[l], alpha[l - 1]);
                    (a - b).powi(2) + a * a * self.scale(l as i32).powi(2) + b * b * self.scale(l as i32 - 1).powi(2)
                }
            })
            .collect()
    }
}

impl Model for SyntheticModel {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn qoi_names(&self) -> Vec<String> {
        vec!["q".into()]
    }

    fn evaluate(&self, stream: &SampleStream, resolution: i32) -> Result<ModelSample> {
        let x = self.common(stream);
        let z = self.scale(resolution) * self.level_noise(stream, resolution);
        let dt = 1.0 / (PROFILE_POINTS - 1) as f64;
        let profile = (0..PROFILE_POINTS)
            .map(|k| {
                let t = k as f64 * dt;
                x * t + z * t * t
            })
            .collect();
        let work = self.base_work * (self.work_rate * resolution as f64).exp2();
        Ok(ModelSample::new(work)
            .with_qoi("q", x + z)
            .with_series("profile", TimeSeries::new(0.0, dt, profile)?))
    }

    fn nominal_work(&self, resolution: i32) -> Option<f64> {
        Some(self.base_work * (self.work_rate * resolution as f64).exp2())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(m: &SyntheticModel, level: i32, n: u64) -> (f64, f64, f64, f64) {
        let (mut sf, mut sc, mut sff, mut scc, mut sfc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let s = SampleStream::for_sample(11, level as usize, i);
            let f = m.evaluate(&s, level).unwrap().get("q").unwrap();
            let c = m.evaluate(&s, level - 1).unwrap().get("q").unwrap();
            sf += f;
            sc += c;
            sff += f * f;
            scc += c * c;
            sfc += f * c;
        }
        let nf = n as f64;
        let (mf, mc) = (sf / nf, sc / nf);
        let vf = (sff - nf * mf * mf) / (nf - 1.0);
        let vc = (scc - nf * mc * mc) / (nf - 1.0);
        let cov = (sfc - nf * mf * mc) / (nf - 1.0);
        (vf, vc, cov, cov / (vf * vc).sqrt())
    }

    #[test]
    fn deterministic() {
        let m = SyntheticModel::new(1.0, 1.0);
        let s = SampleStream::for_sample(1, 0, 0);
        assert_eq!(m.evaluate(&s, 2).unwrap(), m.evaluate(&s, 2).unwrap());
    }

    #[test]
    fn zero_amplitude_is_perfectly_correlated() {
        let m = SyntheticModel::new(1.0, 0.0);
        let s = SampleStream::for_sample(1, 1, 5);
        assert_eq!(m.evaluate(&s, 1).unwrap().get("q"), m.evaluate(&s, 0).unwrap().get("q"));
        assert_eq!(m.correlation(1), 1.0);
    }

    #[test]
    fn empirical_correlation_matches_analytic() {
        let m = SyntheticModel::new(1.0, 1.0);
        let n = 1_000_000;
        let (_, _, _, cor) = moments(&m, 1, n);
        let rho = m.correlation(1);
        assert!((rho - 1.0 / 2.5f64.sqrt()).abs() < 1e-4);
        // standard error of a sample correlation
        let se = (1.0 - rho * rho) / (n as f64).sqrt();
        assert!((cor - rho).abs() < 3.0 * se, "cor {cor} vs {rho}");
    }

    #[test]
    fn empirical_moments_within_four_standard_errors() {
        let m = SyntheticModel::new(1.0, 1.0);
        let n = 100_000;
        for level in 1..=3 {
            let (vf, vc, cov, _) = moments(&m, level, n);
            let sv = |v: f64| v * (2.0 / (n as f64 - 1.0)).sqrt();
            assert!((vf - m.variance(level as usize)).abs() < 4.0 * sv(m.variance(level as usize)));
            assert!((vc - m.variance(level as usize - 1)).abs() < 4.0 * sv(m.variance(level as usize - 1)));
            let se_cov = ((m.variance(level as usize) * m.variance(level as usize - 1) + 1.0) / n as f64).sqrt();
            assert!((cov - 1.0).abs() < 4.0 * se_cov);
        }
        assert!(m.correlation(6) > m.correlation(3));
        assert!(m.correlation(20) > 1.0 - 1e-9);
    }

    #[test]
    fn analytic_weighted_variances_agree_with_indicator_formula() {
        let m = SyntheticModel::new(0.5, 1.3);
        let ind = m.analytic_indicators(4);
        let alpha = [0.4, 0.7, 0.9, 1.0];
        let a = m.analytic_weighted_variances(&alpha);
        let b = crate::estimator::weighted_variances(&ind, &alpha).unwrap();
        for (x, y) in a.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
