//! Small counter-based pseudo-random generator.
//!
//! The crate promises byte-identical outputs for a fixed seed (generated
//! instances, deterministic optimizer runs), so the generator is pinned here
//! instead of depending on an external RNG whose stream may change between
//! releases. SplitMix64 advances a plain counter and hashes it, which also
//! makes forking independent streams trivial.

/// SplitMix64 generator (Steele, Lea, Flood; public domain reference stream).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives an independent stream, e.g. one per worker or per robot.
    pub fn fork(&self, stream: u64) -> Self {
        let mut base = SplitMix64 {
            state: self.state ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        };
        // burn one output so forks of adjacent streams decorrelate
        base.next_u64();
        base
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be nonzero.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // widening multiply keeps the draw unbiased enough for heuristics
        // while staying deterministic and branch-free
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn next_range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + self.next_f64() * (hi - lo)
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    pub fn next_range_usize(&mut self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            return lo;
        }
        lo + self.next_below(hi - lo + 1)
    }

    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Uniform choice by index; panics on an empty slice.
    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.next_below(xs.len())]
    }
}
