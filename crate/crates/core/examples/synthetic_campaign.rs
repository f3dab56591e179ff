//! Adaptive OF-MLMC campaign on the synthetic model, in memory.
//!
//! Run with `cargo run --example synthetic_campaign -- 0.02`.

use ofmlmc::controller::{CampaignConfig, CampaignRunner};
use ofmlmc::estimator::Objective;

fn main() -> ofmlmc::Result<()> {
    let tolerance: f64 = std::env::args().nth(1).map_or(0.02, |a| a.parse().expect("tolerance"));
    let config = CampaignConfig::synthetic("demo", 2024, 3, 1.0, 1.0, Objective::Tolerance(tolerance));
    let model = config.build_model()?;
    let result = CampaignRunner::new(&config, model.as_ref())
        .with_workers(4)
        .with_progress(|state| {
            for line in state.progress_lines() {
                println!("{line}");
            }
        })
        .run()?;

    println!("status    {}", result.status.describe());
    println!("estimate  {:.5} (exact 0)", result.estimate());
    println!("error     {:.5} (target {tolerance})", result.error());
    println!("cost      {:.4e}", result.cost());
    println!("samples   {:?}", result.samples());
    Ok(())
}
