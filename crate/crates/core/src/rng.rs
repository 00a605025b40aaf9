//! Counter-based deterministic random number generator.
//!
//! Every random decision in the pipeline flows from a single seed through
//! this generator. The construction is counter-based (SplitMix64 finalizer
//! applied to `key ^ f(counter)`), so a generator is a pure function of
//! `(key, counter)` and produces identical streams on every platform.
//! Pipeline stages derive independent streams with [`Rng::split`] instead of
//! sharing state.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer (Steele et al., "Fast splittable pseudorandom
/// number generators").
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { key: mix64(seed), counter: 0 }
    }

    /// Derives an independent stream for a pipeline stage. Streams with
    /// different `stream_id`s never overlap regardless of how much either
    /// is consumed.
    pub fn split(&self, stream_id: u64) -> Rng {
        Rng {
            key: mix64(self.key ^ mix64(stream_id.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.key ^ self.counter.wrapping_mul(GOLDEN_GAMMA));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Uses rejection to avoid modulo bias.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn next_range_i32(&mut self, lo: i32, hi: i32) -> i32 {
        assert!(lo <= hi);
        lo + self.next_below((hi - lo + 1) as u64) as i32
    }

    /// Uniform in `[-r, r]`.
    #[inline]
    pub fn next_symmetric(&mut self, r: f64) -> f64 {
        (self.next_f64() * 2.0 - 1.0) * r
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
