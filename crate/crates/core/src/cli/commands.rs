use std::path::{Path, PathBuf};

use log::warn;

use super::report::{compare_methods, render_report, CampaignReport, ComparisonTable, ReportOptions};
use crate::controller::{CampaignConfig, CampaignResult, CampaignRunner, IterationState};
use crate::error::{Error, Result};
use crate::estimator::Objective;
use crate::models::Model;
use crate::scheduler::{CampaignStore, Ledger};

pub const EXIT_OK: i32 = 0;
/// Bad configuration, arguments, budget, campaign or output name.
pub const EXIT_USAGE: i32 = 1;
/// Aborted campaign or runtime failure.
pub const EXIT_RUNTIME: i32 = 2;
/// Stopped by the sample limit; resumable.
pub const EXIT_INTERRUPTED: i32 = 3;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Budget { .. }
        | Error::UnknownCampaign(_)
        | Error::UnknownQoi { .. }
        | Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Interrupted { .. } => EXIT_INTERRUPTED,
        _ => EXIT_RUNTIME,
    }
}

/// Options shared by `run` and `resume`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOptions {
    pub store_root: PathBuf,
    /// Worker count; the configured one when absent.
    pub workers: Option<usize>,
    /// Stop after this many newly executed samples.
    pub max_samples: Option<usize>,
    /// Replace the stored tolerance or budget.
    pub objective: Option<Objective>,
}

/// A campaign as found in the store.
pub struct StoredCampaign {
    pub store: CampaignStore,
    pub config: CampaignConfig,
    /// Objective of the most recent run.
    pub objective: Objective,
    pub ledger: Ledger,
    /// Whether the most recent run finished.
    pub finished: bool,
}

impl StoredCampaign {
    pub fn open(root: &Path, id: &str) -> Result<Self> {
        let store = CampaignStore::open(root, id)?;
        let config = CampaignConfig::from_toml_str(&store.config_text()?)?;
        let (ledger, warnings) = store.load_ledger()?;
        for w in warnings {
            warn!("{w}");
        }
        let events = store.read_state()?;
        let objective = events
            .iter()
            .rev()
            .find(|e| e.event == "start")
            .and_then(|e| serde_json::from_value(e.payload["objective"].clone()).ok())
            .unwrap_or_else(|| config.objective());
        let finished = events.last().is_some_and(|e| e.event == "final");
        Ok(Self {
            store,
            config,
            objective,
            ledger,
            finished,
        })
    }

    /// Rebuild the campaign result from the ledger without executing samples.
    pub fn replay(&self, model: &dyn Model) -> Result<CampaignResult> {
        CampaignRunner::new(&self.config, model)
            .with_prior(self.ledger.clone())
            .with_objective(self.objective)
            .with_sample_limit(0)
            .run()
            .map_err(|e| match e {
                Error::Interrupted { .. } => Error::InvalidArgument(format!(
                    "campaign `{}` has not finished; resume it first",
                    self.store.id()
                )),
                other => other,
            })
    }
}

/// Parse the configuration at `path` and run it as a new stored campaign.
pub fn run(path: &Path, options: &CommandOptions, progress: impl FnMut(&IterationState)) -> Result<CampaignReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
    let config = CampaignConfig::from_toml_str(&text)?;
    run_config(&config, &text, options, progress)
}

/// Run `config` as a new stored campaign; `text` is kept as its configuration.
pub fn run_config(
    config: &CampaignConfig,
    text: &str,
    options: &CommandOptions,
    progress: impl FnMut(&IterationState),
) -> Result<CampaignReport> {
    let mut config = config.clone();
    if let Some(objective) = options.objective {
        config.set_objective(objective);
    }
    config.validate()?;
    let model = config.build_model()?;
    config.build_hierarchy(model.as_ref())?;
    let store = CampaignStore::create(&options.store_root, &config.campaign.id, text)?;
    execute(
        &config,
        model.as_ref(),
        &store,
        Ledger::new(),
        config.objective(),
        options,
        progress,
    )
}

/// Outcome of `resume`.
#[derive(Debug)]
pub enum ResumeOutcome {
    /// The campaign had already finished and no new objective was given.
    Complete,
    Finished(Box<CampaignReport>),
}

/// Continue a stored campaign, reusing every recorded sample.
pub fn resume(id: &str, options: &CommandOptions, progress: impl FnMut(&IterationState)) -> Result<ResumeOutcome> {
    let stored = StoredCampaign::open(&options.store_root, id)?;
    if stored.finished && options.objective.is_none() {
        return Ok(ResumeOutcome::Complete);
    }
    let objective = options.objective.unwrap_or(stored.objective);
    let model = stored.config.build_model()?;
    let report = execute(
        &stored.config,
        model.as_ref(),
        &stored.store,
        stored.ledger.clone(),
        objective,
        options,
        progress,
    )?;
    Ok(ResumeOutcome::Finished(Box::new(report)))
}

fn execute(
    config: &CampaignConfig,
    model: &dyn Model,
    store: &CampaignStore,
    prior: Ledger,
    objective: Objective,
    options: &CommandOptions,
    progress: impl FnMut(&IterationState),
) -> Result<CampaignReport> {
    let mut runner = CampaignRunner::new(config, model)
        .with_store(store)
        .with_prior(prior)
        .with_objective(objective)
        .with_progress(progress);
    if let Some(w) = options.workers {
        runner = runner.with_workers(w);
    }
    if let Some(n) = options.max_samples {
        runner = runner.with_sample_limit(n);
    }
    let result = runner.run()?;
    let rendered = render_report(config, &result, &ReportOptions::default())?;
    rendered.write_to(&store.report_dir()?)?;
    Ok(rendered.report)
}

/// Regenerate report products of a finished campaign from its ledger.
pub fn report(root: &Path, id: &str, options: &ReportOptions) -> Result<CampaignReport> {
    let stored = StoredCampaign::open(root, id)?;
    let model = stored.config.build_model()?;
    let result = stored.replay(model.as_ref())?;
    let rendered = render_report(&stored.config, &result, options)?;
    rendered.write_to(&stored.store.report_dir()?)?;
    Ok(rendered.report)
}

/// Method comparison of a finished campaign, also written to its report directory.
pub fn compare(root: &Path, id: &str) -> Result<ComparisonTable> {
    let stored = StoredCampaign::open(root, id)?;
    let model = stored.config.build_model()?;
    let result = stored.replay(model.as_ref())?;
    let table = compare_methods(&result)?;
    let dir = stored.store.report_dir()?;
    crate::scheduler::write_file(&dir.join("comparison.csv"), table.to_csv().as_bytes())?;
    crate::scheduler::write_file(&dir.join("comparison.txt"), table.to_text().as_bytes())?;
    Ok(table)
}
