//! Operator commands: run, resume, report and compare campaigns kept in a
//! campaign store.
//!
//! Reports are rebuilt from the ledger alone. A stored campaign is replayed
//! through the controller with every sample taken from the ledger, so report
//! generation never calls the model.

mod commands;
mod report;

pub use commands::{
    compare, exit_code, report, resume, run, run_config, CommandOptions, ResumeOutcome, StoredCampaign,
    EXIT_INTERRUPTED, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE,
};
pub use report::{
    compare_methods, level_values, render_report, CampaignReport, ComparisonRow, ComparisonTable, ProductFile,
    QoiSummary, RenderedReport, ReportOptions,
};
