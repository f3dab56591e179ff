//! Stochastic models evaluated on a level hierarchy.
//!
//! A model maps a random input, realized as a [`SampleStream`], and a
//! resolution index to named scalar quantities of interest and optional time
//! series. Evaluations must be pure: the same stream and resolution always
//! give the same result.

mod cloud;
mod faulty;
mod surrogate;
mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cloud::{generate_cloud, CloudConfiguration, CloudParams};
pub use faulty::FaultyModel;
pub use surrogate::{BubbleSystem, SurrogateModel, SurrogateParams, Trajectory};
pub use synthetic::SyntheticModel;

use crate::error::{Error, Result};
use crate::rng::SampleStream;

/// Values on the uniform grid `start + k * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time series step must be positive, got {step}"
            )));
        }
        Ok(Self { start, step, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

/// Output of one model evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSample {
    pub qoi: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, TimeSeries>,
    pub work: f64,
    pub valid: bool,
}

impl ModelSample {
    pub fn new(work: f64) -> Self {
        Self {
            work,
            valid: true,
            ..Default::default()
        }
    }

    pub fn with_qoi(mut self, name: &str, value: f64) -> Self {
        self.qoi.insert(name.to_string(), value);
        self
    }

    pub fn with_series(mut self, name: &str, series: TimeSeries) -> Self {
        self.series.insert(name.to_string(), series);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.qoi.get(name).copied()
    }

    /// True when every scalar and series value is finite.
    pub fn is_finite(&self) -> bool {
        self.qoi.values().all(|v| v.is_finite())
            && self.series.values().all(|s| s.values.iter().all(|v| v.is_finite()))
            && self.work.is_finite()
    }
}

/// A stochastic model with a resolution hierarchy.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// Names of the scalar quantities every valid sample carries.
    fn qoi_names(&self) -> Vec<String>;

    /// Evaluate the model for random input `stream` at `resolution`.
    fn evaluate(&self, stream: &SampleStream, resolution: i32) -> Result<ModelSample>;

    /// A-priori cost of one evaluation at `resolution`, when known.
    fn nominal_work(&self, _resolution: i32) -> Option<f64> {
        None
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn qoi_names(&self) -> Vec<String> {
        (**self).qoi_names()
    }

    fn evaluate(&self, stream: &SampleStream, resolution: i32) -> Result<ModelSample> {
        (**self).evaluate(stream, resolution)
    }

    fn nominal_work(&self, resolution: i32) -> Option<f64> {
        (**self).nominal_work(resolution)
    }
}

/// Evaluate the same random input at resolution `fine` and, for difference
/// levels, at `coarse`. Either side failing fails the pair.
pub fn coupled_pair<M: Model + ?Sized>(
    model: &M,
    stream: &SampleStream,
    fine: i32,
    coarse: Option<i32>,
) -> Result<(ModelSample, Option<ModelSample>)> {
    let f = model.evaluate(stream, fine)?;
    let c = match coarse {
        Some(r) => Some(model.evaluate(stream, r)?),
        None => None,
    };
    Ok((f, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_pair_difference_matches_analytic_form() {
        let m = SyntheticModel::new(1.0, 1.0);
        let stream = SampleStream::for_sample(3, 2, 17);
        let (f, c) = coupled_pair(&m, &stream, 2, Some(1)).unwrap();
        let (f2, c2) = coupled_pair(&m, &stream, 2, Some(1)).unwrap();
        assert_eq!(f, f2);
        assert_eq!(c, c2);
        let d = f.get("q").unwrap() - c.unwrap().get("q").unwrap();
        let expected = 0.25 * m.level_noise(&stream, 2) - 0.5 * m.level_noise(&stream, 1);
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn time_series_rejects_bad_step() {
        assert!(TimeSeries::new(0.0, 0.0, vec![1.0]).is_err());
        let s = TimeSeries::new(1.0, 0.5, vec![0.0; 3]).unwrap();
        assert_eq!(s.grid(), vec![1.0, 1.5, 2.0]);
    }
}
