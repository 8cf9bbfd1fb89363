//! Counter-based pseudo-random numbers.
//!
//! Sample `n` of a stream is a pure function of `(seed, stream, n)`: the
//! SplitMix64 output for state `key + (n + 1) * GOLDEN`. Draws are therefore
//! identical on every platform and independent of evaluation order.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream ids keep independent draws (masks, per-frame noise) decorrelated.
pub mod stream {
    pub const MASKS: u64 = 1;
    pub const COMPRESSIVE_NOISE: u64 = 2;
    pub const KEY_LEFT_NOISE: u64 = 3;
    pub const KEY_RIGHT_NOISE: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: seed ^ splitmix64_mix(stream.wrapping_mul(GOLDEN)),
        }
    }

    /// Starting state of the SplitMix64 sequence this generator replays.
    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn bits(&self, index: u64) -> u64 {
        splitmix64_mix(
            self.key
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)),
        )
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        (self.bits(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&self, index: u64, p: f64) -> bool {
        self.uniform(index) < p
    }

    /// Standard normal draw (Box-Muller over counters `2n` and `2n + 1`).
    #[inline]
    pub fn gaussian(&self, index: u64) -> f64 {
        let a = self.bits(2 * index);
        let b = self.bits(2 * index + 1);
        // u1 in (0, 1] keeps the log finite.
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
