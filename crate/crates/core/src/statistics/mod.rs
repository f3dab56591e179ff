//! Post-processing estimators: multi-level means with percentile bands,
//! kernel densities, correlation matrices, spectral smoothing and sphere
//! averages. All functions are pure.

mod bands;
mod correlation;
mod kde;
mod smoothing;
mod sphere;

pub use bands::{confidence_bands, multilevel_mean, Bands, LevelSeries};
pub use correlation::{correlation_matrix, CorrelationMatrix, HintonCell};
pub use kde::{
    density_grid, kde_1d, kde_2d, linspace, multilevel_density, silverman_bandwidth, solve_the_equation_bandwidth,
    trapezoid, BandwidthMethod, DensityEstimate, DensityTerm, JointDensity,
};
pub use smoothing::gaussian_smooth;
pub use sphere::{sphere_average, Field3};

/// Percentile `p` (0 to 100) of ascending `sorted` values by the
/// nearest-rank rule, averaging the two neighbours when `n p / 100` is an
/// integer.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let np = n as f64 * p.clamp(0.0, 100.0) / 100.0;
    let j = np.floor() as usize;
    if (np - j as f64).abs() < 1e-12 * np.max(1.0) && j > 0 && j < n {
        0.5 * (sorted[j - 1] + sorted[j])
    } else {
        let k = (np.ceil() as usize).clamp(1, n);
        sorted[k - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::percentile;

    #[test]
    fn percentile_rules() {
        assert_eq!(percentile(&[-1.0, 1.0], 50.0), 0.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0], 50.0), 2.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.0), 1.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 100.0), 4.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 90.0), 5.0);
    }
}
