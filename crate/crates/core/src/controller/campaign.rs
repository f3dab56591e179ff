use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::confidence::{inflate_for_confidence, weighted_spreads};
use super::config::{CampaignConfig, CoefficientMode};
use super::decay::{apply_decay_fit, DecayFit};
use crate::error::{Error, Result};
use crate::estimator::{
    allocate_for_tolerance, estimate_indicators, estimator_error, of_mlmc_expectation, optimal_coefficients,
    reoptimize_with_floor, weighted_variances, CoefficientVector, LevelIndicators, Objective, TermSamples,
};
use crate::levels::{warmup_allocation, LevelHierarchy};
use crate::models::Model;
use crate::scheduler::{valid_samples, BatchPlan, CampaignStore, Executor, Ledger, SampleKey, StateEvent};

/// Consecutive top-up rounds for a level without valid samples before the
/// campaign aborts.
pub const MAX_TOP_UP_ROUNDS: usize = 3;

/// Snapshot recorded at the end of every iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub iteration: usize,
    /// Valid samples per level.
    pub samples: Vec<usize>,
    pub failed: Vec<usize>,
    pub indicators: LevelIndicators,
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_fallback: Option<String>,
    /// Variances of the weighted telescoping terms.
    pub variances: Vec<f64>,
    /// Estimated standard error of the estimator.
    pub error: f64,
    pub estimate: f64,
    /// Work charged so far, failed samples included.
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<DecayFit>,
    /// Counts requested for the next iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<usize>>,
}

impl IterationState {
    /// Progress lines: one per level, then the totals.
    pub fn progress_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .samples
            .iter()
            .enumerate()
            .map(|(l, m)| {
                format!(
                    "iter {:>2}  level {l}  M {m:>8}  failed {:>4}  alpha {:>9.5}",
                    self.iteration, self.failed[l], self.alpha[l]
                )
            })
            .collect();
        lines.push(format!(
            "iter {:>2}  error {:.4e}  cost {:.4e}  estimate {:.6e}",
            self.iteration, self.error, self.cost, self.estimate
        ));
        lines
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignStatus {
    ToleranceMet,
    BudgetSpent,
    IterationLimit,
    /// The allocation asked for no further samples before the target was met.
    Stalled,
}

impl CampaignStatus {
    pub fn describe(&self) -> &'static str {
        match self {
            CampaignStatus::ToleranceMet => "tolerance met",
            CampaignStatus::BudgetSpent => "budget spent",
            CampaignStatus::IterationLimit => "iteration limit reached",
            CampaignStatus::Stalled => "allocation stalled",
        }
    }
}

/// Outcome of a finished campaign.
#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub status: CampaignStatus,
    pub qoi: String,
    pub objective: Objective,
    pub hierarchy: LevelHierarchy,
    pub iterations: Vec<IterationState>,
    /// Samples seen by this run, in key order.
    pub ledger: Ledger,
    /// Samples executed by this run rather than taken from an earlier one.
    pub executed: usize,
}

impl CampaignResult {
    pub fn last(&self) -> &IterationState {
        self.iterations
            .last()
            .expect("a finished campaign has at least one iteration")
    }

    pub fn estimate(&self) -> f64 {
        self.last().estimate
    }

    pub fn error(&self) -> f64 {
        self.last().error
    }

    pub fn cost(&self) -> f64 {
        self.last().cost
    }

    pub fn alpha(&self) -> &[f64] {
        &self.last().alpha
    }

    pub fn samples(&self) -> &[usize] {
        &self.last().samples
    }

    /// Valid paired values of `qoi` for every term.
    pub fn terms(&self, qoi: &str) -> Result<Vec<TermSamples>> {
        (0..self.hierarchy.num_levels())
            .map(|l| valid_samples(&self.ledger, l, qoi))
            .collect()
    }
}

/// Drives the adaptive campaign: warm-up, sampling, indicators, decay fit,
/// coefficients, error check and floored re-allocation, until the tolerance
/// is met, the budget is spent or the iteration cap is hit.
///
/// A runner given the ledger of an earlier run replays it: every sample the
/// earlier run recorded is reused instead of recomputed, so an interrupted
/// campaign resumed this way ends with the same estimators as an
/// uninterrupted one.
pub struct CampaignRunner<'a> {
    config: &'a CampaignConfig,
    model: &'a dyn Model,
    objective: Objective,
    store: Option<&'a CampaignStore>,
    prior: Ledger,
    workers: usize,
    sample_limit: Option<usize>,
    progress: Option<Box<dyn FnMut(&IterationState) + 'a>>,
}

impl<'a> CampaignRunner<'a> {
    pub fn new(config: &'a CampaignConfig, model: &'a dyn Model) -> Self {
        Self {
            config,
            model,
            objective: config.objective(),
            store: None,
            prior: Ledger::new(),
            workers: config.campaign.workers,
            sample_limit: None,
            progress: None,
        }
    }

    /// Persist samples and iteration states in `store`.
    pub fn with_store(mut self, store: &'a CampaignStore) -> Self {
        self.store = Some(store);
        self
    }

    /// Reuse the samples of an earlier run.
    pub fn with_prior(mut self, prior: Ledger) -> Self {
        self.prior = prior;
        self
    }

    /// Replace the configured tolerance or budget.
    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Stop with [`Error::Interrupted`] after this many newly executed samples.
    pub fn with_sample_limit(mut self, limit: usize) -> Self {
        self.sample_limit = Some(limit);
        self
    }

    pub fn with_progress(mut self, callback: impl FnMut(&IterationState) + 'a) -> Self {
        self.progress = Some(Box::new(callback));
        self
    }

    pub fn run(mut self) -> Result<CampaignResult> {
        let config = self.config;
        let hierarchy = config.build_hierarchy(self.model)?;
        let qoi = config.qoi(self.model);
        let objective = self.objective;
        let n = hierarchy.num_levels();
        let pair_costs = hierarchy.term_costs();

        let minimum: f64 = pair_costs.iter().sum();
        match objective {
            Objective::Budget(b) if !(b >= minimum) => return Err(Error::Budget { given: b, minimum }),
            Objective::Tolerance(t) if !(t > 0.0) => {
                return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t}")))
            }
            _ => {}
        }

        let mut target = warmup_allocation(&hierarchy);
        if n == 1 {
            target[0] = target[0].max(2);
        }
        if let Objective::Budget(b) = objective {
            let warm_cost: f64 = target.iter().zip(&pair_costs).map(|(&m, w)| m as f64 * w).sum();
            if warm_cost > b {
                target = scale_to_budget(&target, &pair_costs, b);
            }
        }

        let mut executor = Executor::new(self.model, &hierarchy, config.campaign.seed).with_workers(self.workers);
        if let Some(store) = self.store {
            executor = executor.with_store(store);
            store.reset_state()?;
            store.append_state(&StateEvent {
                event: "start".into(),
                iteration: 0,
                payload: serde_json::json!({ "objective": objective, "qoi": qoi }),
            })?;
        }
        if let Some(limit) = self.sample_limit {
            executor = executor.with_sample_limit(limit);
        }

        let mut ledger = Ledger::new();
        let mut iterations: Vec<IterationState> = Vec::new();
        for iteration in 1..=config.campaign.max_iterations {
            let need: Vec<usize> = (0..n).map(|l| target[l].saturating_sub(ledger.done_count(l))).collect();
            if let Some(store) = self.store {
                store.append_state(&StateEvent {
                    event: "plan".into(),
                    iteration,
                    payload: serde_json::json!({ "target": target, "new": need }),
                })?;
            }
            self.issue(&need, &mut ledger, &mut executor)?;
            self.top_up(&target, &mut ledger, &mut executor)?;

            let terms: Vec<TermSamples> = (0..n).map(|l| valid_samples(&ledger, l, &qoi)).collect::<Result<_>>()?;
            let mut ind = estimate_indicators(&terms)?;
            let (decay_fit, unfitted) = if config.campaign.decay_fit {
                apply_decay_fit(&mut ind)
            } else {
                (None, (1..n).filter(|&l| ind.inferred[l]).collect())
            };
            let coefficients = match config.campaign.coefficients {
                CoefficientMode::Unit => CoefficientVector::unit(n),
                CoefficientMode::Optimal if !unfitted.is_empty() => {
                    let reason = format!("difference moments of levels {unfitted:?} are unavailable");
                    warn!("{reason}; using standard MLMC coefficients this iteration");
                    CoefficientVector {
                        alpha: vec![1.0; n],
                        fallback: Some(reason),
                    }
                }
                CoefficientMode::Optimal => optimal_coefficients(&ind),
            };
            let alpha = coefficients.alpha.clone();
            let variances = weighted_variances(&ind, &alpha)?.values;
            let counts: Vec<usize> = terms.iter().map(|t| t.len()).collect();
            let error = estimator_error(&variances, &counts);
            let estimate = of_mlmc_expectation(&terms, &alpha)?;
            let cost = ledger.total_work();
            let failed: Vec<usize> = (0..n).map(|l| ledger.failed_count(l)).collect();

            let mut status = match objective {
                Objective::Tolerance(t) if error <= t => Some(CampaignStatus::ToleranceMet),
                Objective::Budget(b) if cost >= b => Some(CampaignStatus::BudgetSpent),
                _ => None,
            };
            let mut next = None;
            if status.is_none() {
                let failed_work: f64 = ledger.entries().filter(|e| !e.is_done()).map(|e| e.work).sum();
                let floored_objective = match objective {
                    Objective::Budget(b) => Objective::Budget(b - failed_work),
                    other => other,
                };
                let mut alloc = reoptimize_with_floor(&counts, &variances, &ind.work, floored_objective)?;
                if config.campaign.confidence_sigmas > 0.0 {
                    let spreads = weighted_spreads(&terms, &alpha);
                    alloc = inflate_for_confidence(
                        &alloc,
                        &variances,
                        &spreads,
                        &ind.work,
                        floored_objective,
                        config.campaign.confidence_sigmas,
                    )?;
                }
                let mut samples = alloc.samples;
                if samples == counts {
                    if let Objective::Tolerance(t) = objective {
                        let free = allocate_for_tolerance(&variances, &ind.work, t)?;
                        samples = samples.iter().zip(&free.samples).map(|(a, b)| *a.max(b)).collect();
                    }
                }
                if samples == counts {
                    status = Some(match objective {
                        Objective::Budget(_) => CampaignStatus::BudgetSpent,
                        Objective::Tolerance(_) => CampaignStatus::Stalled,
                    });
                } else if iteration == config.campaign.max_iterations {
                    status = Some(CampaignStatus::IterationLimit);
                } else {
                    next = Some(samples);
                }
            }

            let state = IterationState {
                iteration,
                samples: counts,
                failed,
                indicators: ind,
                alpha,
                coefficient_fallback: coefficients.fallback,
                variances,
                error,
                estimate,
                cost,
                decay_fit,
                target: next.clone(),
            };
            for line in state.progress_lines() {
                info!("{line}");
            }
            if let Some(cb) = self.progress.as_mut() {
                cb(&state);
            }
            if let Some(store) = self.store {
                store.append_state(&StateEvent {
                    event: "iteration".into(),
                    iteration,
                    payload: serde_json::to_value(&state).map_err(|e| Error::Numerical(e.to_string()))?,
                })?;
            }
            iterations.push(state);

            if let Some(status) = status {
                if let Some(store) = self.store {
                    store.append_state(&StateEvent {
                        event: "final".into(),
                        iteration,
                        payload: serde_json::json!({
                            "status": status,
                            "estimate": estimate,
                            "error": error,
                            "cost": cost,
                            "objective": objective,
                        }),
                    })?;
                }
                return Ok(CampaignResult {
                    status,
                    qoi,
                    objective,
                    hierarchy: hierarchy.clone(),
                    iterations,
                    ledger,
                    executed: executor.executed(),
                });
            }
            target = next.expect("a continuing iteration has a target");
        }
        unreachable!("the last iteration always sets a status")
    }

    /// Issue `need[l]` fresh keys on every level, reusing prior outcomes.
    fn issue(&self, need: &[usize], ledger: &mut Ledger, executor: &mut Executor) -> Result<()> {
        let mut keys = Vec::new();
        for (l, &m) in need.iter().enumerate() {
            let start = ledger.recorded_count(l) as u64;
            keys.extend((start..start + m as u64).map(|i| SampleKey::new(l, i)));
        }
        if keys.is_empty() {
            return Ok(());
        }
        for k in &keys {
            if let Some(e) = self.prior.get(k) {
                ledger.insert(e.clone());
            }
        }
        let plan = BatchPlan::batched(keys, self.config.campaign.batch_size);
        executor.execute_plan(&plan, ledger)?;
        Ok(())
    }

    /// Re-sample levels left without any valid sample, aborting after
    /// [`MAX_TOP_UP_ROUNDS`] fruitless rounds.
    fn top_up(&self, target: &[usize], ledger: &mut Ledger, executor: &mut Executor) -> Result<()> {
        for _ in 0..MAX_TOP_UP_ROUNDS {
            let empty: Vec<usize> = (0..target.len()).filter(|&l| ledger.done_count(l) == 0).collect();
            if empty.is_empty() {
                return Ok(());
            }
            warn!("levels {empty:?} have no valid samples; topping up");
            let mut need = vec![0; target.len()];
            for &l in &empty {
                need[l] = target[l].max(1);
            }
            self.issue(&need, ledger, executor)?;
        }
        match (0..target.len()).find(|&l| ledger.done_count(l) == 0) {
            Some(level) => Err(Error::LevelAbort { level }),
            None => Ok(()),
        }
    }
}

/// Largest uniform shrink of `counts`, each kept at one or more, whose cost fits `budget`.
fn scale_to_budget(counts: &[usize], work: &[f64], budget: f64) -> Vec<usize> {
    let shrink = |s: f64| -> Vec<usize> {
        counts
            .iter()
            .map(|&m| ((m as f64 * s).floor() as usize).max(1))
            .collect()
    };
    let cost = |c: &[usize]| -> f64 { c.iter().zip(work).map(|(&m, w)| m as f64 * w).sum() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cost(&shrink(mid)) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shrink(lo)
}

/// Run `config` in memory with its own model.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    let model = config.build_model()?;
    CampaignRunner::new(config, model.as_ref()).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SyntheticModel;

    fn config(objective: Objective) -> CampaignConfig {
        CampaignConfig::synthetic("t", 11, 3, 1.0, 1.0, objective)
    }

    #[test]
    fn tolerance_campaign_terminates_quickly() {
        let r = run_campaign(&config(Objective::Tolerance(0.05))).unwrap();
        assert_eq!(r.status, CampaignStatus::ToleranceMet);
        assert!(r.error() <= 0.05);
        assert!(r.iterations.len() <= 3, "{} iterations", r.iterations.len());
        let m = SyntheticModel::new(1.0, 1.0);
        let exact = estimator_error(&m.analytic_weighted_variances(r.alpha()), r.samples());
        assert!((exact - r.error()).abs() < 0.25 * exact, "{exact} vs {}", r.error());
    }

    #[test]
    fn loose_tolerance_stops_after_warm_up() {
        let r = run_campaign(&config(Objective::Tolerance(10.0))).unwrap();
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.samples(), &[512, 64, 8, 1]);
    }

    #[test]
    fn minimal_budget_gives_one_sample_per_level() {
        let mut c = config(Objective::Budget(1.0 + 17.0 + 272.0 + 4352.0));
        c.campaign.seed = 5;
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.samples(), &[1, 1, 1, 1]);
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.status, CampaignStatus::BudgetSpent);
    }

    #[test]
    fn counts_and_cost_never_decrease() {
        let r = run_campaign(&config(Objective::Tolerance(0.01))).unwrap();
        for w in r.iterations.windows(2) {
            assert!(w[1].cost >= w[0].cost);
            assert!(w[1].samples.iter().zip(&w[0].samples).all(|(a, b)| a >= b));
        }
        let h = &r.hierarchy;
        let charged: f64 = r.ledger.entries().map(|e| h.pair_cost(e.level)).sum();
        assert!((charged - r.cost()).abs() <= 1e-9 * charged);
    }

    #[test]
    fn interrupted_run_resumes_to_the_same_result() {
        let c = config(Objective::Tolerance(0.1));
        let model = c.build_model().unwrap();
        let full = CampaignRunner::new(&c, model.as_ref()).run().unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let store = CampaignStore::create(tmp.path(), "r", "").unwrap();
        for limit in [50, 200] {
            let (prior, _) = store.load_ledger().unwrap();
            let out = CampaignRunner::new(&c, model.as_ref())
                .with_store(&store)
                .with_prior(prior)
                .with_sample_limit(limit)
                .run();
            assert!(matches!(out, Err(Error::Interrupted { .. })));
        }
        let (prior, _) = store.load_ledger().unwrap();
        let resumed = CampaignRunner::new(&c, model.as_ref())
            .with_store(&store)
            .with_prior(prior)
            .run()
            .unwrap();
        assert!(resumed.executed > 0);
        assert_eq!(resumed.estimate().to_bits(), full.estimate().to_bits());
        assert_eq!(resumed.samples(), full.samples());
        assert_eq!(resumed.alpha(), full.alpha());
    }
}
