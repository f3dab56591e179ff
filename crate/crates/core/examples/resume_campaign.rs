//! Persisted campaign interrupted by a sample limit and resumed from its
//! ledger; the result matches an uninterrupted run bit for bit.

use ofmlmc::cli::{self, CommandOptions, ResumeOutcome};
use ofmlmc::controller::{run_campaign, CampaignConfig};
use ofmlmc::estimator::Objective;
use ofmlmc::Error;

fn main() -> ofmlmc::Result<()> {
    let root = tempfile::tempdir().expect("temporary store");
    let config = CampaignConfig::synthetic("resumable", 3, 3, 1.0, 1.0, Objective::Tolerance(0.1));
    let mut options = CommandOptions {
        store_root: root.path().to_path_buf(),
        max_samples: Some(300),
        ..Default::default()
    };
    match cli::run_config(&config, &config.to_toml_string(), &options, |_| {}) {
        Err(Error::Interrupted { executed }) => println!("interrupted after {executed} samples"),
        other => panic!("expected an interruption, got {other:?}"),
    }

    options.max_samples = None;
    let ResumeOutcome::Finished(report) = cli::resume("resumable", &options, |_| {})? else {
        unreachable!("the campaign was interrupted");
    };
    let reference = run_campaign(&config)?;
    println!("resumed       {:.17e}", report.estimate);
    println!("uninterrupted {:.17e}", reference.estimate());
    println!(
        "identical: {}",
        report.estimate.to_bits() == reference.estimate().to_bits()
    );

    let again = cli::resume("resumable", &options, |_| {})?;
    println!("second resume: {}", matches!(again, ResumeOutcome::Complete));
    Ok(())
}
