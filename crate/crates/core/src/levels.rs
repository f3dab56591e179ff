//! Discretization-level hierarchy, a-priori work model and warm-up allocation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ceil_count;

/// Ordered hierarchy of resolution levels `0..=L`.
///
/// `work[l]` is the a-priori cost of one evaluation on level `l`. The cost of
/// one sample of the telescoping term `l >= 1` is the pair cost
/// `work[l] + work[l - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelHierarchy {
    work: Vec<f64>,
    rate: f64,
    resolution: Vec<i32>,
}

impl LevelHierarchy {
    /// Geometric hierarchy with `work[l] = base_work * 2^(rate * l)`.
    pub fn geometric(num_levels: usize, base_work: f64, rate: f64) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::InvalidArgument("hierarchy needs at least one level".into()));
        }
        if !(rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "work growth rate must be positive, got {rate}"
            )));
        }
        let work = (0..num_levels)
            .map(|l| work_model(l as i32, base_work, rate))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            work,
            rate,
            resolution: (0..num_levels as i32).collect(),
        })
    }

    /// Hierarchy from explicit per-level costs (must be strictly increasing).
    pub fn from_work(work: Vec<f64>) -> Result<Self> {
        if work.is_empty() {
            return Err(Error::InvalidArgument("hierarchy needs at least one level".into()));
        }
        if work.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("level work must be positive and finite".into()));
        }
        if work.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument("level work must be strictly increasing".into()));
        }
        let rate = if work.len() > 1 {
            (work[work.len() - 1] / work[0]).log2() / (work.len() - 1) as f64
        } else {
            1.0
        };
        let resolution = (0..work.len() as i32).collect();
        Ok(Self { work, rate, resolution })
    }

    /// Replace the opaque per-level resolution descriptors handed to models.
    pub fn with_resolution(mut self, resolution: Vec<i32>) -> Result<Self> {
        if resolution.len() != self.work.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} resolution descriptors, got {}",
                self.work.len(),
                resolution.len()
            )));
        }
        self.resolution = resolution;
        Ok(self)
    }

    pub fn num_levels(&self) -> usize {
        self.work.len()
    }

    /// Index `L` of the finest level.
    pub fn finest(&self) -> usize {
        self.work.len() - 1
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn work(&self) -> &[f64] {
        &self.work
    }

    pub fn resolution(&self, level: usize) -> i32 {
        self.resolution[level]
    }

    /// Cost of one sample of telescoping term `level`.
    pub fn pair_cost(&self, level: usize) -> f64 {
        if level == 0 {
            self.work[0]
        } else {
            self.work[level] + self.work[level - 1]
        }
    }

    pub fn term_costs(&self) -> Vec<f64> {
        (0..self.num_levels()).map(|l| self.pair_cost(l)).collect()
    }
}

/// A-priori work of one evaluation on `level`: `base_work * 2^(rate * level)`.
pub fn work_model(level: i32, base_work: f64, rate: f64) -> Result<f64> {
    if level < 0 {
        return Err(Error::InvalidArgument(format!(
            "level must be non-negative, got {level}"
        )));
    }
    if !(base_work > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "base work must be positive, got {base_work}"
        )));
    }
    Ok(base_work * (rate * level as f64).exp2())
}

/// Level-dependent warm-up counts `ceil(W_L / W_l / 2^(L - l))`.
///
/// The finest level always receives exactly one sample.
pub fn warmup_allocation(hierarchy: &LevelHierarchy) -> Vec<usize> {
    let finest = hierarchy.finest();
    let w_fine = hierarchy.work[finest];
    hierarchy
        .work
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            let m = w_fine / w / ((finest - l) as f64).exp2();
            ceil_count(m).max(1)
        })
        .collect()
}
