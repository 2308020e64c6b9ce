//! Reproducible random streams.
//!
//! Every stochastic consumer (mobility, traffic, channel, each node) draws
//! from its own stream. A stream is a ChaCha8 generator keyed by
//! `SHA-256(master_seed as 8 big-endian bytes || label)`; the first eight
//! digest bytes, read big-endian, form the `stream_id`. Forking is a pure
//! function of `(master_seed, label)`, so the order in which consumers fork
//! never changes what they draw, and ChaCha output is identical on every
//! platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Derives the stream for `label` under `master_seed`.
pub fn fork_stream(master_seed: u64, label: &[u8]) -> RandomStream {
    let mut h = Sha256::new();
    h.update(master_seed.to_be_bytes());
    h.update(label);
    let digest: [u8; 32] = h.finalize().into();
    let stream_id = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    RandomStream {
        seed: master_seed,
        stream_id,
        rng: ChaCha8Rng::from_seed(digest),
    }
}

impl RandomStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[lo, hi]`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.rng.random_range(0..n)
    }

    /// Exponential draw with the given rate (events per unit).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        // 1 - U lies in (0, 1], so ln never sees zero.
        -(1.0 - self.unit()).ln() / rate
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
