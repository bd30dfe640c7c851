//! Seeded, splittable random streams.
//!
//! Every replicate, chain and particle run draws from its own
//! [`RandomStream`], derived from a master seed plus a path of indices.
//! Derivation is a pure function, so results do not depend on how work is
//! scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ChaCha8 stream. Cheap to clone; clones continue identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    inner: ChaCha8Rng,
}

/// Serializable position of a [`RandomStream`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub algorithm: String,
    /// 32-byte key, lowercase hex.
    pub seed: String,
    pub stream: u64,
    /// Word position as a decimal string (the value is 128 bits wide).
    pub word_pos: String,
}

const ALGORITHM: &str = "chacha8";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into a new 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream `index` of `master`.
    pub fn child(master: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master);
        inner.set_stream(index);
        Self { inner }
    }

    /// Child stream addressed by a path, e.g. `(spec, n, replicate)`.
    pub fn derive(master: u64, path: &[u64]) -> Self {
        match path.split_last() {
            Some((&last, head)) => Self::child(derive_seed(master, head), last),
            None => Self::from_seed(master),
        }
    }

    pub fn descriptor(&self) -> StreamDescriptor {
        let seed = self.inner.get_seed();
        StreamDescriptor {
            algorithm: ALGORITHM.to_string(),
            seed: seed.iter().map(|b| format!("{b:02x}")).collect(),
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos().to_string(),
        }
    }

    pub fn from_descriptor(desc: &StreamDescriptor) -> Result<Self> {
        let bad = |why: &str| Error::InvalidCheckpoint(format!("rng descriptor: {why}"));
        if desc.algorithm != ALGORITHM {
            return Err(bad("unknown algorithm"));
        }
        if desc.seed.len() != 64 {
            return Err(bad("seed must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&desc.seed[2 * i..2 * i + 2], 16)
                .map_err(|_| bad("seed is not hex"))?;
        }
        let word_pos: u128 = desc.word_pos.parse().map_err(|_| bad("word_pos"))?;
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(desc.stream);
        inner.set_word_pos(word_pos);
        Ok(Self { inner })
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
