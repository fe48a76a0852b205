//! Deterministic counter-style pseudo-random generator.
//!
//! Monte Carlo sampling keys an independent stream off `(seed, cell, trial)`
//! so a run is reproducible bit for bit regardless of scheduling. Not a
//! cryptographic generator.

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream keyed by a seed plus a list of counters (cell indices, trial
    /// numbers, ...). Distinct keys give effectively independent streams.
    pub fn keyed(seed: u64, parts: &[u64]) -> Self {
        let mut state = mix(seed ^ GAMMA);
        for (i, part) in parts.iter().enumerate() {
            state = mix(state ^ part.wrapping_mul(GAMMA).wrapping_add(i as u64 + 1));
        }
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `0..bound`. Modulo bias is far below anything the
    /// statistical tolerances here can see.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        self.next_u64() % bound
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
