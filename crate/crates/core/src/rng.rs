//! Counter-based splittable random keys.
//!
//! A [`RngKey`] is an immutable 128-bit value. Child keys are derived with
//! [`RngKey::split`] / [`RngKey::fold_in`], and draws come from a
//! [`RngStream`] that hashes `(key, counter)`; no mutable generator state is
//! ever shared, so any node of a key tree can be regenerated on its own.
//!
//! The hash is two rounds of the SplitMix64 finalizer over both key words
//! and the counter, with distinct odd constants for the derivation and draw
//! domains. Output depends only on integer arithmetic, so streams are
//! identical on every platform. Not cryptographic.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const DRAW_DOMAIN: u64 = 0xD1B5_4A32_D192_ED03;
const SPLIT_DOMAIN: u64 = 0x8CB9_2BA7_2F3D_8DD7;
const WORD_DOMAIN: u64 = 0xABC9_8388_FB8F_AC03;

#[inline]
fn fmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn hash3(k0: u64, k1: u64, counter: u64, domain: u64) -> u64 {
    let a = fmix(k0 ^ counter.wrapping_mul(GOLDEN).wrapping_add(domain));
    fmix(a ^ k1.rotate_left(29) ^ domain.rotate_left(17)).wrapping_add(a.rotate_left(23))
}

/// Opaque 128-bit key of a splittable generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey {
    words: [u64; 2],
}

impl RngKey {
    /// Root key for an integer seed.
    pub fn from_seed(seed: u64) -> Self {
        let w0 = fmix(seed.wrapping_add(GOLDEN));
        let w1 = fmix(w0 ^ seed.rotate_left(32) ^ WORD_DOMAIN);
        Self { words: [w0, w1] }
    }

    pub fn from_words(words: [u64; 2]) -> Self {
        Self { words }
    }

    pub fn words(&self) -> [u64; 2] {
        self.words
    }

    /// Child key number `index`. Children of distinct indices are
    /// independent; the same `(key, index)` always yields the same child.
    pub fn fold_in(&self, index: u64) -> RngKey {
        let [k0, k1] = self.words;
        let c = index.wrapping_mul(2);
        RngKey {
            words: [
                hash3(k0, k1, c, SPLIT_DOMAIN),
                hash3(k1, k0, c.wrapping_add(1), SPLIT_DOMAIN ^ WORD_DOMAIN),
            ],
        }
    }

    /// `n` child keys, equal to `fold_in(0..n)`.
    pub fn split(&self, n: usize) -> Vec<RngKey> {
        (0..n as u64).map(|i| self.fold_in(i)).collect()
    }

    pub fn split2(&self) -> (RngKey, RngKey) {
        (self.fold_in(0), self.fold_in(1))
    }

    pub fn split3(&self) -> (RngKey, RngKey, RngKey) {
        (self.fold_in(0), self.fold_in(1), self.fold_in(2))
    }

    /// A fresh draw stream starting at counter 0.
    pub fn stream(&self) -> RngStream {
        RngStream {
            key: *self,
            counter: 0,
        }
    }
}

/// Sequential draws from one key: the i-th output is a pure function of the
/// key and `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    key: RngKey,
    counter: u64,
}

impl RngStream {
    pub fn key(&self) -> RngKey {
        self.key
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let [k0, k1] = self.key.words;
        let out = hash3(k0, k1, self.counter, DRAW_DOMAIN);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` by rejection (no modulo bias).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
