use std::thread;

use ofmlmc::controller::{CampaignConfig, CampaignRunner};
use ofmlmc::estimator::{estimator_error, Objective};
use ofmlmc::models::SyntheticModel;

const CAMPAIGNS: u64 = 500;
const TOLERANCE: f64 = 0.1;

/// Share of campaigns whose final allocation meets the tolerance under the
/// exact term variances.
fn coverage(sigmas: f64) -> f64 {
    let truth = SyntheticModel::new(1.0, 1.0);
    let workers = thread::available_parallelism().map_or(4, |n| n.get());
    let met: usize = thread::scope(|s| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let truth = &truth;
                s.spawn(move || {
                    (w..CAMPAIGNS)
                        .step_by(workers)
                        .filter(|&seed| {
                            let mut config = CampaignConfig::synthetic(
                                "coverage",
                                seed,
                                2,
                                1.0,
                                1.0,
                                Objective::Tolerance(TOLERANCE),
                            );
                            config.campaign.confidence_sigmas = sigmas;
                            let model = config.build_model().unwrap();
                            let r = CampaignRunner::new(&config, model.as_ref()).run().unwrap();
                            let exact = truth.analytic_weighted_variances(r.alpha());
                            estimator_error(&exact, r.samples()) <= TOLERANCE
                        })
                        .count()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });
    met as f64 / CAMPAIGNS as f64
}

#[test]
fn two_sigma_inflation_covers_the_tolerance() {
    let p = coverage(2.0);
    assert!(p >= 0.95, "coverage {p}");
}

#[test]
fn inflation_never_lowers_counts() {
    for seed in 0..10 {
        let run = |sigmas: f64| {
            let mut config = CampaignConfig::synthetic("inflation", seed, 2, 1.0, 1.0, Objective::Tolerance(TOLERANCE));
            config.campaign.confidence_sigmas = sigmas;
            let model = config.build_model().unwrap();
            let r = CampaignRunner::new(&config, model.as_ref()).run().unwrap();
            r.samples().to_vec()
        };
        let (plain, inflated) = (run(0.0), run(2.0));
        assert!(
            inflated.iter().zip(&plain).all(|(a, b)| a >= b),
            "{inflated:?} vs {plain:?}"
        );
    }
}
