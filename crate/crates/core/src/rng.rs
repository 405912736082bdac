//! Seeded splitmix64 generator.
//!
//! Every randomized component in this crate (hash matrix rows, workload
//! generation) draws from this generator so that a 64-bit seed fully
//! determines the run.

/// splitmix64 state. Weyl increment plus a finalizing mix per draw.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut x = self.state;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^ (x >> 31)
    }

    pub fn next_u128(&mut self) -> u128 {
        let hi = self.next_u64() as u128;
        let lo = self.next_u64() as u128;
        (hi << 64) | lo
    }

    /// Uniform value in `[0, 1)`, 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform value in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Key masked to `bits` (1..=128).
    pub fn key_bits(&mut self, bits: u32) -> u128 {
        debug_assert!(bits >= 1 && bits <= 128);
        if bits == 128 {
            self.next_u128()
        } else {
            self.next_u128() & ((1u128 << bits) - 1)
        }
    }
}
