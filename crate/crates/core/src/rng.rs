//! Counter-based random numbers.
//!
//! Word `i` of substream `(seed, stream)` is a pure function of the triple
//! `(seed, stream, i)`: it is word `i % 8` of ChaCha8 block `i / 8`, keyed by
//! the little-endian seed (zero-padded to 32 bytes) with the ChaCha stream id
//! set to `stream`. Pinned to `rand_chacha` 0.9; any change of generator or
//! keying is a breaking change for recorded sample sequences.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed plus substream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }
}

/// Random-access view of one substream.
#[derive(Clone)]
pub struct CounterRng {
    core: ChaCha8Rng,
    cached_block: Option<u64>,
    block: [u64; 8],
}

impl CounterRng {
    pub fn new(spec: RngSpec) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&spec.seed.to_le_bytes());
        let mut core = ChaCha8Rng::from_seed(key);
        core.set_stream(spec.stream);
        Self {
            core,
            cached_block: None,
            block: [0; 8],
        }
    }

    /// The eight 64-bit words of block `counter`.
    pub fn block(&mut self, counter: u64) -> [u64; 8] {
        if self.cached_block != Some(counter) {
            // 16 u32 words per ChaCha block.
            self.core.set_word_pos(u128::from(counter) * 16);
            for w in self.block.iter_mut() {
                *w = self.core.next_u64();
            }
            self.cached_block = Some(counter);
        }
        self.block
    }

    pub fn word(&mut self, index: u64) -> u64 {
        self.block(index / 8)[(index % 8) as usize]
    }
}

/// Maps a word to `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard exponential variate from one word.
#[inline]
pub fn standard_exponential(word: u64) -> f64 {
    -(-unit_f64(word)).ln_1p()
}
