//! Deterministic counter-based random number generation.
//!
//! Every stochastic step in this crate (weight init, shuffling, dropout
//! masks, structure sampling) draws from an [`RngStream`]. The generator is
//! frozen here so that equal seeds give bit-equal sequences on every
//! platform and in every future version:
//!
//! * draw `i` (1-based) of a stream with seed `s` is
//!   `mix64(s + i * 0x9E3779B97F4A7C15)` with all arithmetic mod 2^64,
//!   where `mix64` is the SplitMix64 finalizer
//!   (`z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!   z *= 0x94D049BB133111EB; z ^= z >> 31`);
//! * a labelled child stream has seed `mix64(s ^ mix64(fnv1a64(label)))`
//!   and an indexed child has seed
//!   `mix64(s ^ mix64(index + 0x9E3779B97F4A7C15))`;
//! * floats in `[0, 1)` take the top 53 bits of a draw divided by 2^53.
//!
//! Children derive from the parent's seed only, never from its position,
//! so splitting is reproducible regardless of how much the parent has been
//! consumed. Splitting twice with the same label yields the same stream.

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a byte string. Used for label hashing here and for input
/// digests in run manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF29CE484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001B3);
    }
    h
}

/// A deterministic random stream: a seed plus a draw counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, counter: 0 }
    }

    /// Child stream for a named purpose, independent of this stream's
    /// position and of children with other labels.
    pub fn split(&self, label: &str) -> RngStream {
        RngStream {
            seed: mix64(self.seed ^ mix64(fnv1a64(label.as_bytes()))),
            counter: 0,
        }
    }

    /// Indexed child stream, e.g. one per epoch or per forward pass.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: mix64(self.seed ^ mix64(index.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Bernoulli draw: true with probability `p`. Consumes one draw.
    pub fn flip(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `[0, n)`. Uses the modulo reduction; the bias is
    /// below 2^-50 for every `n` used in this crate and the reduction is
    /// part of the frozen generator definition.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is undefined");
        self.next_u64() % n
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Pick one element of a non-empty slice.
    pub fn choose<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.below(xs.len() as u64) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_give_bitwise_equal_sequences() {
        let mut a = RngStream::new(0xDEADBEEF);
        let mut b = RngStream::new(0xDEADBEEF);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_labels_give_distinct_streams() {
        let root = RngStream::new(7);
        let mut a = root.split("init");
        let mut b = root.split("shuffle");
        let va: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
    }

    #[test]
    fn split_is_independent_of_parent_position() {
        let mut consumed = RngStream::new(99);
        for _ in 0..17 {
            consumed.next_u64();
        }
        let fresh = RngStream::new(99);
        assert_eq!(consumed.split("x"), fresh.split("x"));
        assert_eq!(consumed.child(3), fresh.child(3));
    }

    #[test]
    fn floats_are_in_unit_interval() {
        let mut r = RngStream::new(1);
        for _ in 0..10_000 {
            let v = r.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = RngStream::new(5);
        let mut xs: Vec<u32> = (0..100).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<u32>>());
        assert_ne!(xs, (0..100).collect::<Vec<u32>>());
    }

    #[test]
    fn known_fnv_vector() {
        // FNV-1a of empty input is the offset basis.
        assert_eq!(fnv1a64(b""), 0xCBF29CE484222325);
    }
}
