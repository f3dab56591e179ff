//! OF-MLMC against standard MLMC and plain Monte Carlo: the comparison
//! table of one campaign, then measured work of both multi-level variants
//! over repeated campaigns at moderate level correlations.

use ofmlmc::cli::compare_methods;
use ofmlmc::controller::{run_campaign, CampaignConfig, CoefficientMode};
use ofmlmc::estimator::Objective;

fn main() -> ofmlmc::Result<()> {
    let decay = 0.25;
    let tol = 0.03;
    let config = CampaignConfig::synthetic("compare", 1, 3, decay, 1.0, Objective::Tolerance(tol));
    let result = run_campaign(&config)?;
    print!("{}", compare_methods(&result)?.to_text());

    let (mut of, mut ml) = (0.0, 0.0);
    let runs = 8;
    for seed in 0..runs {
        let mut c = CampaignConfig::synthetic("compare", seed, 3, decay, 1.0, Objective::Tolerance(tol));
        of += run_campaign(&c)?.cost();
        c.campaign.coefficients = CoefficientMode::Unit;
        ml += run_campaign(&c)?.cost();
    }
    println!(
        "mean work over {runs} campaigns: OF-MLMC {:.4e}, MLMC {:.4e}, ratio {:.3}",
        of / runs as f64,
        ml / runs as f64,
        of / ml
    );
    Ok(())
}
