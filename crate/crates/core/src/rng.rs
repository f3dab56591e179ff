//! Counter-based random streams.
//!
//! Every sample of a campaign is identified by `(campaign seed, level, index)`.
//! The triple is hashed into a 64-bit stream id, and the stream output is a
//! pure function of `(stream id, counter)`. Fine and coarse evaluations of a
//! coupled pair therefore see the same random input, distinct keys see
//! independent inputs, and the values never depend on thread scheduling.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// A deterministic random stream with an explicit counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleStream {
    id: u64,
    counter: u64,
}

impl SampleStream {
    pub fn new(id: u64) -> Self {
        Self { id, counter: 0 }
    }

    /// Stream for one sample of a campaign.
    pub fn for_sample(campaign_seed: u64, level: usize, index: u64) -> Self {
        Self::new(stream_id(campaign_seed, level, index))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Child stream identified by `label`. Deriving does not advance `self`.
    pub fn derive(&self, label: u64) -> SampleStream {
        let child = mix64(self.id ^ mix64(label.wrapping_add(0x94D0_49BB_1331_11EB)));
        SampleStream::new(child)
    }

    /// Child stream identified by a textual label.
    pub fn derive_named(&self, label: &str) -> SampleStream {
        self.derive(fnv1a64(label.as_bytes()))
    }

    /// Uniform sample in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 / SCALE
    }
}

impl RngCore for SampleStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        let z = self.id ^ self.counter.wrapping_mul(GOLDEN);
        mix64(mix64(z).wrapping_add(self.id.rotate_left(29)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Stable 64-bit stream id for a sample key.
pub fn stream_id(campaign_seed: u64, level: usize, index: u64) -> u64 {
    let mut h = mix64(campaign_seed ^ 0xD134_2543_DE82_EF95);
    h = mix64(h ^ (level as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    mix64(h ^ index.wrapping_mul(GOLDEN).wrapping_add(0x2545_F491_4F6C_DD1D))
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_key_same_stream() {
        let mut a = SampleStream::for_sample(7, 2, 11);
        let mut b = SampleStream::for_sample(7, 2, 11);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn level_enters_the_hash() {
        assert_ne!(stream_id(1, 1, 0), stream_id(1, 2, 0));
        assert_ne!(stream_id(1, 0, 1), stream_id(1, 1, 0));
        assert_ne!(stream_id(1, 0, 0), stream_id(2, 0, 0));
    }

    #[test]
    fn million_ids_do_not_collide() {
        let mut seen = HashSet::with_capacity(1_000_000);
        for level in 0..4 {
            for index in 0..250_000u64 {
                assert!(seen.insert(stream_id(42, level, index)));
            }
        }
    }

    #[test]
    fn derive_does_not_advance_parent() {
        let parent = SampleStream::new(99);
        let mut c1 = parent.derive(3);
        let mut c2 = parent.derive(3);
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_ne!(parent.derive(3).next_u64(), parent.derive(4).next_u64());
    }

    #[test]
    fn uniform_moments_look_right() {
        let mut s = SampleStream::new(5);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sq += u * u;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.002);
    }
}
