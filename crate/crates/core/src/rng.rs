//! Reproducible random streams.
//!
//! Every stochastic task receives its own [`RngStream`], derived from the run
//! seed and a list of tags describing the task (group side, peptide id, draw
//! index, ...). Streams are ChaCha8 keyed by the seed with the 64-bit stream
//! id selecting an independent keystream, so the draws of a task never depend
//! on how tasks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Sub-stream identified by `tags`; same parent and tags give the same stream.
    pub fn derive(&self, tags: &[u64]) -> Self {
        let mut h = splitmix64(self.stream ^ 0x6a09_e667_f3bc_c908);
        for &t in tags {
            h = splitmix64(h ^ splitmix64(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        Self::new(self.seed, h)
    }

    pub fn derive_str(&self, tag: &str) -> Self {
        self.derive(&[label_hash(tag)])
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash, used to key streams by labels (peptide ids,
/// group labels) so a task's stream survives reordering of the input.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
