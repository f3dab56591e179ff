//! A campaign with 5% of samples failing and one forced failure on the
//! coarsest level. Failed samples are excluded and their work is charged.

use ofmlmc::controller::{run_campaign, CampaignConfig};
use ofmlmc::estimator::Objective;

fn main() -> ofmlmc::Result<()> {
    let mut config = CampaignConfig::synthetic("faulty", 7, 3, 1.0, 1.0, Objective::Tolerance(0.03));
    config.model.failure_rate = 0.05;
    config.model.fail_samples = vec![[0, 0]];
    let result = run_campaign(&config)?;
    let last = result.last();
    println!("status   {}", result.status.describe());
    println!("valid    {:?}", last.samples);
    println!("failed   {:?}", last.failed);
    println!("estimate {:.5} +- {:.5}", last.estimate, last.error);
    let first = result.ledger.entries().next().expect("level 0 sample 0");
    println!(
        "sample (0, 0): {:?} ({})",
        first.status,
        first.reason.as_deref().unwrap_or("")
    );
    Ok(())
}
