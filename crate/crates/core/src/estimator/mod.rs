//! Moment estimation, optimal control-variate coefficients, error model and
//! sample allocation for the optimal-fidelity multi-level estimator.
//!
//! Levels are indexed `0..=L`. Term `0` is the coarsest level `alpha_0 q_0`;
//! term `l >= 1` is the weighted difference `alpha_l q_l - alpha_{l-1} q_{l-1}`
//! evaluated on a coupled pair. All functions here are pure.

mod allocation;
mod coefficients;
mod expectation;
mod indicators;
mod tridiagonal;

pub use allocation::{
    allocate_for_budget, allocate_for_tolerance, estimator_error, reoptimize_with_floor, weighted_variances,
    Allocation, Objective, WeightedDifferenceVariances,
};
pub use coefficients::{
    optimal_coefficients, solve_coefficient_system, variance_cost, CoefficientVector, MAX_CONDITION,
};
pub use expectation::{mc_cost_estimate, of_mlmc_expectation, McCostEstimate};
pub use indicators::{estimate_indicators, LevelIndicators, TermSamples};
pub use tridiagonal::solve_symmetric_tridiagonal;

/// `ceil` that ignores round-off just above an integer, so that exact
/// allocations such as `100 * 2.0` stay at `200` instead of `201`.
pub(crate) fn ceil_count(x: f64) -> usize {
    if !x.is_finite() || x <= 0.0 {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::ceil_count;

    #[test]
    fn ceil_count_snaps_round_off() {
        assert_eq!(ceil_count(200.00000000000003), 200);
        assert_eq!(ceil_count(12.5), 13);
        assert_eq!(ceil_count(0.0), 0);
        assert_eq!(ceil_count(f64::NAN), 0);
        assert_eq!(ceil_count(1e-30), 1);
    }
}
