use std::collections::BTreeSet;

use super::{Model, ModelSample};
use crate::error::{Error, Result};
use crate::rng::SampleStream;

/// Wraps a model and fails a reproducible subset of its evaluations.
///
/// A sample fails when a uniform draw from a sub-stream of its random input
/// falls below `failure_rate`, or when its stream id is listed in
/// `forced`. Both sides of a coupled pair share the stream, so a failure
/// always takes out the whole pair.
pub struct FaultyModel<M> {
    inner: M,
    failure_rate: f64,
    forced: BTreeSet<u64>,
    panic: bool,
}

impl<M: Model> FaultyModel<M> {
    pub fn new(inner: M, failure_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&failure_rate) {
            return Err(Error::InvalidArgument(format!(
                "failure rate must lie in [0, 1], got {failure_rate}"
            )));
        }
        Ok(Self {
            inner,
            failure_rate,
            forced: BTreeSet::new(),
            panic: false,
        })
    }

    /// Always fail the sample with this stream id.
    pub fn fail_stream(mut self, stream_id: u64) -> Self {
        self.forced.insert(stream_id);
        self
    }

    /// Fail by panicking instead of returning an error.
    pub fn panicking(mut self) -> Self {
        self.panic = true;
        self
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn fails(&self, stream: &SampleStream) -> bool {
        self.forced.contains(&stream.id())
            || (self.failure_rate > 0.0 && stream.derive_named("fault").next_f64() < self.failure_rate)
    }
}

impl<M: Model> Model for FaultyModel<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn qoi_names(&self) -> Vec<String> {
        self.inner.qoi_names()
    }

    fn evaluate(&self, stream: &SampleStream, resolution: i32) -> Result<ModelSample> {
        if self.fails(stream) {
            if self.panic {
                panic!("injected fault in stream {:#x}", stream.id());
            }
            return Err(Error::Model(format!("injected fault in stream {:#x}", stream.id())));
        }
        self.inner.evaluate(stream, resolution)
    }

    fn nominal_work(&self, resolution: i32) -> Option<f64> {
        self.inner.nominal_work(resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SyntheticModel;

    #[test]
    fn failure_rate_is_respected() {
        let m = FaultyModel::new(SyntheticModel::new(1.0, 1.0), 0.05).unwrap();
        let n = 20_000;
        let failed = (0..n)
            .filter(|&i| m.evaluate(&SampleStream::for_sample(1, 0, i), 0).is_err())
            .count();
        let rate = failed as f64 / n as f64;
        assert!((rate - 0.05).abs() < 0.006, "rate {rate}");
    }

    #[test]
    fn forced_stream_fails_on_both_levels() {
        let s = SampleStream::for_sample(2, 1, 4);
        let m = FaultyModel::new(SyntheticModel::new(1.0, 1.0), 0.0)
            .unwrap()
            .fail_stream(s.id());
        assert!(m.evaluate(&s, 1).is_err());
        assert!(m.evaluate(&s, 0).is_err());
        assert!(m.evaluate(&SampleStream::for_sample(2, 1, 5), 1).is_ok());
    }
}
