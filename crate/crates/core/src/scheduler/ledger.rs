use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SampleKey;
use crate::error::{Error, Result};
use crate::estimator::TermSamples;
use crate::models::{ModelSample, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Pending,
    Done,
    Failed,
}

/// Outcome of one sample. Field order puts the key first so that truncated
/// records remain identifiable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleLedgerEntry {
    pub level: usize,
    pub index: u64,
    pub status: SampleStatus,
    /// Work charged for the sample: model-reported pair work when done, the
    /// a-priori pair cost when failed.
    pub work: f64,
    /// Wall-clock seconds; informational only.
    #[serde(default)]
    pub elapsed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandbox: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<ModelSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<ModelSample>,
}

impl SampleLedgerEntry {
    pub fn key(&self) -> SampleKey {
        SampleKey::new(self.level, self.index)
    }

    pub fn done(key: SampleKey, fine: ModelSample, coarse: Option<ModelSample>) -> Self {
        let work = fine.work + coarse.as_ref().map_or(0.0, |c| c.work);
        Self {
            level: key.level,
            index: key.index,
            status: SampleStatus::Done,
            work,
            elapsed: 0.0,
            reason: None,
            sandbox: None,
            fine: Some(fine),
            coarse,
        }
    }

    pub fn failed(key: SampleKey, work: f64, reason: impl Into<String>) -> Self {
        Self {
            level: key.level,
            index: key.index,
            status: SampleStatus::Failed,
            work,
            elapsed: 0.0,
            reason: Some(reason.into()),
            sandbox: None,
            fine: None,
            coarse: None,
        }
    }

    pub fn is_done(&self) -> bool {
        self.status == SampleStatus::Done
    }
}

/// All recorded samples of a campaign, ordered by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ledger {
    entries: BTreeMap<SampleKey, SampleLedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an entry. A key already present is replaced.
    pub fn insert(&mut self, entry: SampleLedgerEntry) {
        self.entries.insert(entry.key(), entry);
    }

    pub fn get(&self, key: &SampleKey) -> Option<&SampleLedgerEntry> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &SampleKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &SampleLedgerEntry> {
        self.entries.values()
    }

    pub fn level_entries(&self, level: usize) -> impl Iterator<Item = &SampleLedgerEntry> {
        self.entries
            .range(SampleKey::new(level, 0)..=SampleKey::new(level, u64::MAX))
            .map(|(_, e)| e)
    }

    pub fn done_count(&self, level: usize) -> usize {
        self.level_entries(level).filter(|e| e.is_done()).count()
    }

    pub fn failed_count(&self, level: usize) -> usize {
        self.level_entries(level)
            .filter(|e| e.status == SampleStatus::Failed)
            .count()
    }

    /// Number of keys recorded on `level`, whatever their status.
    pub fn recorded_count(&self, level: usize) -> usize {
        self.level_entries(level).count()
    }

    /// Sum of charged work over done and failed samples.
    pub fn total_work(&self) -> f64 {
        self.entries
            .values()
            .filter(|e| e.status != SampleStatus::Pending)
            .map(|e| e.work)
            .sum()
    }

    /// Names of the scalar outputs found in done samples.
    pub fn qoi_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        if let Some(e) = self.entries.values().find(|e| e.is_done()) {
            if let Some(f) = &e.fine {
                names.extend(f.qoi.keys().cloned());
            }
        }
        names
    }

    /// Names of the time series found in done samples.
    pub fn series_names(&self) -> Vec<String> {
        self.entries
            .values()
            .find(|e| e.is_done())
            .and_then(|e| e.fine.as_ref())
            .map(|f| f.series.keys().cloned().collect())
            .unwrap_or_default()
    }
}

/// Paired values of `qoi` over the done samples of term `level`, in key order.
pub fn valid_samples(ledger: &Ledger, level: usize, qoi: &str) -> Result<TermSamples> {
    let mut t = TermSamples::new(level);
    for e in ledger.level_entries(level).filter(|e| e.is_done()) {
        let fine = e.fine.as_ref().ok_or_else(|| missing(level, e.index, "fine payload"))?;
        let f = fine.get(qoi).ok_or_else(|| Error::UnknownQoi {
            name: qoi.to_string(),
            available: fine.qoi.keys().cloned().collect(),
        })?;
        let c = if level > 0 {
            let coarse = e
                .coarse
                .as_ref()
                .ok_or_else(|| missing(level, e.index, "coarse payload"))?;
            Some(coarse.get(qoi).ok_or_else(|| Error::UnknownQoi {
                name: qoi.to_string(),
                available: coarse.qoi.keys().cloned().collect(),
            })?)
        } else {
            None
        };
        t.push(f, c, e.work, fine.work);
    }
    Ok(t)
}

/// Fine and coarse time series `name` over the done samples of term `level`.
pub fn valid_series(ledger: &Ledger, level: usize, name: &str) -> Result<(Vec<TimeSeries>, Vec<TimeSeries>)> {
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    for e in ledger.level_entries(level).filter(|e| e.is_done()) {
        let get = |s: &Option<ModelSample>| -> Result<TimeSeries> {
            let s = s.as_ref().ok_or_else(|| missing(level, e.index, "payload"))?;
            s.series.get(name).cloned().ok_or_else(|| Error::UnknownQoi {
                name: name.to_string(),
                available: s.series.keys().cloned().collect(),
            })
        };
        fine.push(get(&e.fine)?);
        if level > 0 {
            coarse.push(get(&e.coarse)?);
        }
    }
    Ok((fine, coarse))
}

fn missing(level: usize, index: u64, what: &str) -> Error {
    Error::Estimator {
        level,
        reason: format!("sample {index} is done but has no {what}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: f64) -> ModelSample {
        ModelSample::new(1.0).with_qoi("q", v)
    }

    #[test]
    fn filters_failed_entries() {
        let mut ledger = Ledger::new();
        for i in 0..10 {
            ledger.insert(SampleLedgerEntry::done(
                SampleKey::new(1, i),
                sample(i as f64),
                Some(sample(0.0)),
            ));
        }
        ledger.insert(SampleLedgerEntry::failed(SampleKey::new(1, 10), 2.0, "boom"));
        let t = valid_samples(&ledger, 1, "q").unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(ledger.failed_count(1), 1);
        assert_eq!(ledger.total_work(), 22.0);
    }

    #[test]
    fn all_failed_gives_empty_collection() {
        let mut ledger = Ledger::new();
        ledger.insert(SampleLedgerEntry::failed(SampleKey::new(0, 0), 1.0, "boom"));
        assert!(valid_samples(&ledger, 0, "q").unwrap().is_empty());
    }

    #[test]
    fn unknown_qoi_lists_available_names() {
        let mut ledger = Ledger::new();
        ledger.insert(SampleLedgerEntry::done(SampleKey::new(0, 0), sample(1.0), None));
        match valid_samples(&ledger, 0, "nope") {
            Err(Error::UnknownQoi { available, .. }) => {
                assert_eq!(available, vec!["q".to_string()])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn level_ranges_do_not_leak() {
        let mut ledger = Ledger::new();
        ledger.insert(SampleLedgerEntry::done(SampleKey::new(0, u64::MAX), sample(1.0), None));
        ledger.insert(SampleLedgerEntry::done(
            SampleKey::new(1, 0),
            sample(1.0),
            Some(sample(1.0)),
        ));
        assert_eq!(ledger.done_count(0), 1);
        assert_eq!(ledger.done_count(1), 1);
    }
}
