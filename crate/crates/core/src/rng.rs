//! Counter-based, splittable random streams.
//!
//! A stream is a `(key, counter)` pair. The `i`-th output of a stream is
//! `mix64(key + (i + 1) * GOLDEN)` where `mix64` is the SplitMix64 finalizer
//! (Steele, Lea & Flood 2014). Keys for sub-streams are derived as
//! `mix64(mix64(parent ^ domain) + index * GOLDEN)`, so any stream can be
//! rebuilt from the master seed, a domain tag and an index without replaying
//! other streams. Only wrapping 64-bit integer arithmetic is used; the output
//! is identical on every platform.
//!
//! Derived quantities:
//! - `next_f64`: top 53 bits scaled by `2^-53`, in `[0, 1)`.
//! - `below(n)`: Lemire's multiply-shift with rejection, unbiased.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain tags separating the stream families used by the simulator.
pub mod domain {
    pub const HOLDINGS: u64 = 0x686f_6c64_696e_6773;
    pub const ROUND: u64 = 0x726f_756e_6400_0000;
    pub const TRIAL: u64 = 0x7472_6961_6c00_0000;
    pub const REPLICATE: u64 = 0x7265_706c_6963_6174;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed),
            counter: 0,
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Independent stream for `(domain, index)` under this stream's key.
    /// Does not advance `self`.
    pub fn derive(&self, domain: u64, index: u64) -> StreamRng {
        StreamRng {
            key: mix64(mix64(self.key ^ domain).wrapping_add(index.wrapping_mul(GOLDEN))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// True with probability `p` (exactly never for `p <= 0`, always for `p >= 1`).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            // Still consume a draw so stream positions do not depend on p.
            self.next_u64();
            return true;
        }
        self.next_f64() < p
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }
}
