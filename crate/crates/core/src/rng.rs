//! Deterministic, splittable random streams.
//!
//! A stream is identified by a seed and a path of integer keys, e.g.
//! `(seed, block_row, block_col)` for DP-Pix noise or `(seed, restart)` for
//! attack initialization. The path is folded into a 256-bit ChaCha8 key with
//! SplitMix64, so a stream depends only on its identity and never on the
//! order in which other streams were consumed.
//!
//! Uniforms take the top 53 bits of each 64-bit output. Gaussian variates use
//! the Box–Muller transform on two uniforms `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`:
//! `sqrt(-2 ln u1) * cos(2π u2)`, one variate per pair.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Well-known stream namespaces, so unrelated consumers of the same seed
/// never share a stream.
pub mod tags {
    pub const DP_PIX: u64 = 0x64_70_70_69_78;
    pub const ATTACK_INIT: u64 = 0x61_74_6b_69_6e_69;
    pub const GLYPHS: u64 = 0x67_6c_79_70_68;
    pub const SHUFFLE: u64 = 0x73_68_75_66_66_6c;
    pub const MONTE_CARLO: u64 = 0x6d_63;
    pub const BOOTSTRAP: u64 = 0x62_6f_6f_74;
    pub const AUDIT: u64 = 0x61_75_64_69_74;
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, &[])
    }

    /// Stream for `(seed, path...)`.
    pub fn keyed(seed: u64, path: &[u64]) -> Self {
        let mut state = seed;
        let mut acc = splitmix64(&mut state);
        for &k in path {
            let mut s = acc ^ k.wrapping_mul(GOLDEN);
            acc = splitmix64(&mut s) ^ splitmix64(&mut s).rotate_left(17);
        }
        let mut key = [0u8; 32];
        let mut s = acc;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream of this one; consumes one draw from the parent.
    pub fn split(&mut self, key: u64) -> Self {
        let s = self.next_u64();
        Self::keyed(s, &[key])
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection, no modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// Standard normal via Box–Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.gaussian()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
