//! Deterministic random streams.
//!
//! Every randomized routine takes an [`RngStream`] (or a generator derived
//! from one). A stream is identified by a master seed and a stream index;
//! sharded work derives one child stream per shard so results do not depend
//! on how many workers ran them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, stream_id: 0 }
    }

    pub fn with_stream(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Child stream `index` of this stream. Children of distinct parents or
    /// with distinct indices never share a ChaCha stream.
    pub fn child(&self, index: u64) -> Self {
        // splitmix64 over (stream_id, index) keeps children well separated.
        let mut z = self
            .stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self { master_seed: self.master_seed, stream_id: z }
    }

    pub fn rng(&self) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
