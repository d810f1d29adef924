//! Reproducible random number streams.
//!
//! Every unit of parallel work (outer replicate, MCMC chain, sweep entry)
//! gets its own [`RngStream`], derived from a root seed by counter-style
//! mixing. Streams with the same `(seed, substream)` pair always yield the
//! same sequence, regardless of thread count or execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A named position in the global stream space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    substream: u64,
}

impl RngStream {
    /// Root stream for a run.
    pub fn new(seed: u64) -> Self {
        RngStream { seed, substream: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream_id(&self) -> u64 {
        self.substream
    }

    /// Derive a child stream. Derivation is deterministic and mixes the tag
    /// into the substream id, so `s.substream(a).substream(b)` differs from
    /// `s.substream(b).substream(a)`.
    pub fn substream(&self, tag: u64) -> Self {
        RngStream {
            seed: self.seed,
            substream: splitmix64(self.substream ^ splitmix64(tag ^ 0x51_7c_c1_b7_27_22_0a_95)),
        }
    }

    /// Instantiate the generator for this stream position.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        let mut state = splitmix64(self.seed) ^ self.substream;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}
