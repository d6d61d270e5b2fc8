//! Reproducible random streams.
//!
//! Every replica draws from its own ChaCha stream, keyed by the master seed,
//! a purpose tag and the replica index. Results therefore do not depend on
//! how replicas are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Source of independent per-replica generators derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFactory {
    master: u64,
}

impl StreamFactory {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Generator for `(tag, replica)`. Distinct tags give unrelated seeds;
    /// distinct replicas of one tag use distinct ChaCha streams.
    pub fn stream(&self, tag: u64, replica: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.master ^ splitmix64(tag)));
        rng.set_stream(replica);
        rng
    }

    /// Child factory, for handing a sub-experiment its own seed space.
    pub fn derive(&self, tag: u64) -> StreamFactory {
        StreamFactory::new(splitmix64(
            self.master.wrapping_add(splitmix64(tag ^ 0xa5a5_5a5a)),
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
