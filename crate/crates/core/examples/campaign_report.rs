//! Stored campaign with every statistics product regenerated from the ledger.
//!
//! Pass a store directory to keep the output, e.g.
//! `cargo run --example campaign_report -- /tmp/ofmlmc-store`.

use std::path::PathBuf;

use ofmlmc::cli::{self, CommandOptions, ReportOptions};
use ofmlmc::controller::CampaignConfig;
use ofmlmc::estimator::Objective;

fn main() -> ofmlmc::Result<()> {
    let tmp = tempfile::tempdir().expect("temporary store");
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| tmp.path().to_path_buf());
    let config = CampaignConfig::synthetic("report-demo", 5, 3, 1.0, 1.0, Objective::Tolerance(0.05));
    let options = CommandOptions {
        store_root: root.clone(),
        ..Default::default()
    };
    let report = cli::run_config(&config, &config.to_toml_string(), &options, |_| {})?;
    print!("{}", report.summary());

    let again = cli::report(&root, "report-demo", &ReportOptions::default())?;
    println!("regenerated report identical: {}", again == report);
    for p in &again.products {
        println!(
            "  {:<12} {}",
            p.product,
            root.join("report-demo/report").join(&p.file).display()
        );
    }
    for n in &again.notes {
        println!("note: {n}");
    }
    Ok(())
}
