//! Sample execution and bookkeeping.
//!
//! Every sample is addressed by a [`SampleKey`]. An [`Executor`] runs a
//! [`BatchPlan`] on a local worker pool, each sample in its own sandbox
//! directory when a [`CampaignStore`] is attached, and records the outcome in
//! a [`Ledger`]. Model failures become `failed` entries; they never abort the
//! batch.

mod executor;
mod ledger;
mod store;

use serde::{Deserialize, Serialize};

pub use executor::{ExecutionSummary, Executor};
pub use ledger::{valid_samples, valid_series, Ledger, SampleLedgerEntry, SampleStatus};
pub(crate) use store::write_file;
pub use store::{resolve_store_root, CampaignStore, StateEvent, STORE_ENV};

use crate::rng::SampleStream;

/// Identity of one sample of a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub level: usize,
    pub index: u64,
}

impl SampleKey {
    pub fn new(level: usize, index: u64) -> Self {
        Self { level, index }
    }

    /// Random stream shared by both sides of the coupled pair.
    pub fn stream(&self, campaign_seed: u64) -> SampleStream {
        SampleStream::for_sample(campaign_seed, self.level, self.index)
    }
}

/// A group of samples executed as one job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchGroup {
    pub keys: Vec<SampleKey>,
    pub workers: usize,
}

/// Partition of sample keys into jobs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub groups: Vec<BatchGroup>,
}

impl BatchPlan {
    /// One job per sample.
    pub fn singletons(keys: impl IntoIterator<Item = SampleKey>) -> Self {
        Self {
            groups: keys
                .into_iter()
                .map(|k| BatchGroup {
                    keys: vec![k],
                    workers: 1,
                })
                .collect(),
        }
    }

    /// Job batching: consecutive keys of the same level are packed into jobs
    /// of at most `batch_size` samples.
    pub fn batched(keys: impl IntoIterator<Item = SampleKey>, batch_size: usize) -> Self {
        let batch_size = batch_size.max(1);
        let mut groups: Vec<BatchGroup> = Vec::new();
        for k in keys {
            match groups.last_mut() {
                Some(g) if g.keys.len() < batch_size && g.keys[0].level == k.level => g.keys.push(k),
                _ => groups.push(BatchGroup {
                    keys: vec![k],
                    workers: 1,
                }),
            }
        }
        Self { groups }
    }

    /// Job merging: adjacent jobs smaller than `min_size` are combined, even
    /// across levels, so that short jobs do not dominate scheduling overhead.
    pub fn merged(self, min_size: usize) -> Self {
        let mut groups: Vec<BatchGroup> = Vec::new();
        for g in self.groups {
            match groups.last_mut() {
                Some(last) if last.keys.len() < min_size && g.keys.len() < min_size => last.keys.extend(g.keys),
                _ => groups.push(g),
            }
        }
        Self { groups }
    }

    pub fn keys(&self) -> impl Iterator<Item = &SampleKey> {
        self.groups.iter().flat_map(|g| g.keys.iter())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.keys.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn keys() -> Vec<SampleKey> {
        let mut k: Vec<SampleKey> = (0..7).map(|i| SampleKey::new(0, i)).collect();
        k.extend((0..3).map(|i| SampleKey::new(1, i)));
        k.push(SampleKey::new(2, 0));
        k
    }

    #[test]
    fn batching_keeps_every_key_once() {
        let plan = BatchPlan::batched(keys(), 3);
        let seen: Vec<SampleKey> = plan.keys().copied().collect();
        assert_eq!(seen, keys());
        assert_eq!(plan.groups.len(), 5);
        assert!(plan
            .groups
            .iter()
            .all(|g| g.keys.iter().all(|k| k.level == g.keys[0].level)));
    }

    #[test]
    fn merging_combines_small_jobs() {
        let plan = BatchPlan::batched(keys(), 3).merged(4);
        let unique: BTreeSet<SampleKey> = plan.keys().copied().collect();
        assert_eq!(unique.len(), plan.len());
        assert_eq!(plan.len(), keys().len());
        assert!(plan.groups.len() < 5);
    }

    #[test]
    fn empty_plan() {
        assert!(BatchPlan::batched(Vec::new(), 4).is_empty());
    }
}
