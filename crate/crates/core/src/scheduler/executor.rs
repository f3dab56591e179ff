use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::ledger::{Ledger, SampleLedgerEntry};
use super::store::CampaignStore;
use super::{BatchGroup, BatchPlan, SampleKey};
use crate::error::{Error, Result};
use crate::levels::LevelHierarchy;
use crate::models::{coupled_pair, Model, ModelSample};

/// Counts for one call of [`Executor::execute_plan`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    /// Keys in the plan.
    pub planned: usize,
    /// Keys already present in the ledger.
    pub skipped: usize,
    pub done: usize,
    pub failed: usize,
    /// Work charged for the newly recorded samples.
    pub work: f64,
}

/// Runs coupled sample pairs on a local worker pool.
pub struct Executor<'a> {
    model: &'a dyn Model,
    hierarchy: &'a LevelHierarchy,
    seed: u64,
    workers: usize,
    store: Option<&'a CampaignStore>,
    sample_limit: Option<usize>,
    executed: usize,
}

impl<'a> Executor<'a> {
    pub fn new(model: &'a dyn Model, hierarchy: &'a LevelHierarchy, seed: u64) -> Self {
        Self {
            model,
            hierarchy,
            seed,
            workers: 1,
            store: None,
            sample_limit: None,
            executed: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Record every sample in `store` and give it a sandbox directory.
    pub fn with_store(mut self, store: &'a CampaignStore) -> Self {
        self.store = Some(store);
        self
    }

    /// Stop with [`Error::Interrupted`] once this many new samples have run.
    pub fn with_sample_limit(mut self, limit: usize) -> Self {
        self.sample_limit = Some(limit);
        self
    }

    /// New samples run so far by this executor.
    pub fn executed(&self) -> usize {
        self.executed
    }

    /// Execute every key of `plan` not yet in `ledger`.
    ///
    /// Outcomes are inserted into `ledger` and appended to the store as they
    /// arrive. When the sample limit cuts the plan short, the keys that did
    /// run are recorded before [`Error::Interrupted`] is returned.
    pub fn execute_plan(&mut self, plan: &BatchPlan, ledger: &mut Ledger) -> Result<ExecutionSummary> {
        let mut summary = ExecutionSummary {
            planned: plan.len(),
            ..Default::default()
        };
        let mut budget = self.sample_limit.map(|l| l.saturating_sub(self.executed));
        let mut truncated = false;
        let mut groups: Vec<BatchGroup> = Vec::new();
        for g in &plan.groups {
            let mut keys = Vec::new();
            for k in &g.keys {
                if ledger.contains(k) {
                    summary.skipped += 1;
                    continue;
                }
                match &mut budget {
                    Some(0) => truncated = true,
                    Some(b) => {
                        *b -= 1;
                        keys.push(*k);
                    }
                    None => keys.push(*k),
                }
            }
            if !keys.is_empty() {
                groups.push(BatchGroup {
                    keys,
                    workers: g.workers,
                });
            }
        }

        let mut store_error = None;
        let mut record = |entry: SampleLedgerEntry, summary: &mut ExecutionSummary, ledger: &mut Ledger| {
            if entry.is_done() {
                summary.done += 1;
            } else {
                summary.failed += 1;
                warn!(
                    "sample {}/{} failed: {}",
                    entry.level,
                    entry.index,
                    entry.reason.as_deref().unwrap_or("unknown")
                );
            }
            summary.work += entry.work;
            if let Some(store) = self.store {
                if let Err(e) = store.append_entry(&entry) {
                    store_error.get_or_insert(e);
                }
            }
            ledger.insert(entry);
        };

        let threads = self.workers.min(groups.len());
        if threads <= 1 {
            for g in &groups {
                for k in &g.keys {
                    record(self.run_sample(*k), &mut summary, ledger);
                }
            }
        } else {
            let next = AtomicUsize::new(0);
            let (tx, rx) = mpsc::channel();
            let this = &*self;
            std::thread::scope(|scope| {
                for _ in 0..threads {
                    let tx = tx.clone();
                    let next = &next;
                    let groups = &groups;
                    scope.spawn(move || loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(g) = groups.get(i) else { break };
                        for k in &g.keys {
                            if tx.send(this.run_sample(*k)).is_err() {
                                return;
                            }
                        }
                    });
                }
                drop(tx);
                for entry in rx {
                    record(entry, &mut summary, ledger);
                }
            });
        }

        let ran = summary.done + summary.failed;
        self.executed += ran;
        debug!(
            "executed {ran} samples ({} failed), skipped {}",
            summary.failed, summary.skipped
        );
        if let Some(e) = store_error {
            return Err(e);
        }
        if truncated {
            return Err(Error::Interrupted {
                executed: self.executed,
            });
        }
        Ok(summary)
    }

    /// Evaluate one coupled pair. Never fails: errors, panics and invalid
    /// outputs become a failed entry charged the a-priori pair cost.
    pub fn run_sample(&self, key: SampleKey) -> SampleLedgerEntry {
        let start = Instant::now();
        let stream = key.stream(self.seed);
        let fine_res = self.hierarchy.resolution(key.level);
        let coarse_res = (key.level > 0).then(|| self.hierarchy.resolution(key.level - 1));

        let mut sandbox_error = None;
        if let Some(store) = self.store {
            let input = serde_json::json!({
                "model": self.model.name(),
                "level": key.level,
                "index": key.index,
                "stream": format!("{:#018x}", stream.id()),
                "fine_resolution": fine_res,
                "coarse_resolution": coarse_res,
            });
            if let Err(e) = store.write_sandbox_file(&key, "input.json", input.to_string().as_bytes()) {
                sandbox_error = Some(e.to_string());
            }
        }

        let outcome = match sandbox_error {
            Some(e) => Err(e),
            None => match catch_unwind(AssertUnwindSafe(|| {
                coupled_pair(self.model, &stream, fine_res, coarse_res)
            })) {
                Ok(Ok((fine, coarse))) => self.check(fine, coarse),
                Ok(Err(e)) => Err(e.to_string()),
                Err(payload) => Err(format!("model panicked: {}", panic_message(payload.as_ref()))),
            },
        };
        let mut entry = match outcome {
            Ok((fine, coarse)) => SampleLedgerEntry::done(key, fine, coarse),
            Err(reason) => SampleLedgerEntry::failed(key, self.hierarchy.pair_cost(key.level), reason),
        };
        entry.elapsed = start.elapsed().as_secs_f64();

        if let Some(store) = self.store {
            entry.sandbox = Some(store.sandbox_dir(&key));
            let output = serde_json::to_vec(&entry).unwrap_or_default();
            let log = format!(
                "status: {:?}\nelapsed: {:.6} s\nwork: {}\n{}",
                entry.status,
                entry.elapsed,
                entry.work,
                entry
                    .reason
                    .as_deref()
                    .map(|r| format!("reason: {r}\n"))
                    .unwrap_or_default()
            );
            for (name, bytes) in [("output.json", output), ("log.txt", log.into_bytes())] {
                if let Err(e) = store.write_sandbox_file(&key, name, &bytes) {
                    warn!("cannot write sandbox of sample {}/{}: {e}", key.level, key.index);
                }
            }
        }
        entry
    }

    fn check(
        &self,
        fine: ModelSample,
        coarse: Option<ModelSample>,
    ) -> std::result::Result<(ModelSample, Option<ModelSample>), String> {
        let names = self.model.qoi_names();
        for (side, s) in std::iter::once(("fine", &fine)).chain(coarse.as_ref().map(|c| ("coarse", c))) {
            if !s.valid {
                return Err(format!("{side} evaluation flagged invalid"));
            }
            if !s.is_finite() {
                return Err(format!("{side} evaluation produced non-finite output"));
            }
            if let Some(n) = names.iter().find(|n| !s.qoi.contains_key(n.as_str())) {
                return Err(format!("{side} evaluation is missing `{n}`"));
            }
        }
        Ok((fine, coarse))
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FaultyModel, SyntheticModel};

    fn keys(level: usize, n: u64) -> Vec<SampleKey> {
        (0..n).map(|i| SampleKey::new(level, i)).collect()
    }

    #[test]
    fn parallel_matches_serial() {
        let model = SyntheticModel::new(1.0, 1.0);
        let h = LevelHierarchy::geometric(3, 1.0, 4.0).unwrap();
        let plan = BatchPlan::batched(keys(0, 40).into_iter().chain(keys(2, 10)), 3);
        let mut a = Ledger::new();
        let mut b = Ledger::new();
        Executor::new(&model, &h, 9).execute_plan(&plan, &mut a).unwrap();
        Executor::new(&model, &h, 9)
            .with_workers(4)
            .execute_plan(&plan, &mut b)
            .unwrap();
        let strip = |l: &Ledger| -> Vec<_> {
            l.entries()
                .map(|e| (e.key(), e.fine.clone(), e.coarse.clone(), e.work))
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let h = LevelHierarchy::geometric(2, 1.0, 4.0).unwrap();
        let model = FaultyModel::new(SyntheticModel::new(1.0, 1.0), 0.0)
            .unwrap()
            .fail_stream(SampleKey::new(1, 2).stream(5).id())
            .panicking();
        let mut ledger = Ledger::new();
        let s = Executor::new(&model, &h, 5)
            .with_workers(2)
            .execute_plan(&BatchPlan::singletons(keys(1, 6)), &mut ledger)
            .unwrap();
        assert_eq!((s.done, s.failed), (5, 1));
        let e = ledger.get(&SampleKey::new(1, 2)).unwrap();
        assert!(!e.is_done());
        assert_eq!(e.work, h.pair_cost(1));
    }

    #[test]
    fn sample_limit_interrupts_and_rerun_skips() {
        let model = SyntheticModel::new(1.0, 1.0);
        let h = LevelHierarchy::geometric(1, 1.0, 4.0).unwrap();
        let plan = BatchPlan::singletons(keys(0, 10));
        let mut ledger = Ledger::new();
        let err = Executor::new(&model, &h, 1)
            .with_sample_limit(4)
            .execute_plan(&plan, &mut ledger)
            .unwrap_err();
        assert!(matches!(err, Error::Interrupted { executed: 4 }));
        assert_eq!(ledger.len(), 4);
        let s = Executor::new(&model, &h, 1).execute_plan(&plan, &mut ledger).unwrap();
        assert_eq!((s.skipped, s.done), (4, 6));
    }

    #[test]
    fn sandbox_files_are_written() {
        let tmp = tempfile::tempdir().unwrap();
        let store = CampaignStore::create(tmp.path(), "sb", "").unwrap();
        let model = SyntheticModel::new(1.0, 1.0);
        let h = LevelHierarchy::geometric(2, 1.0, 4.0).unwrap();
        let mut ledger = Ledger::new();
        Executor::new(&model, &h, 3)
            .with_store(&store)
            .execute_plan(&BatchPlan::singletons(keys(1, 2)), &mut ledger)
            .unwrap();
        let dir = store.sandbox_dir(&SampleKey::new(1, 1));
        for f in ["input.json", "output.json", "log.txt"] {
            assert!(dir.join(f).is_file(), "{f} missing");
        }
        let (restored, _) = store.load_ledger().unwrap();
        assert_eq!(restored, ledger);
    }
}
