//! Seeded random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is filled by
//! SplitMix64 from a 64-bit stream seed (`Xoshiro256PlusPlus::seed_from_u64`).
//! Stream seeds are derived from a root seed, a label and an index with
//! [`derive_seed`], so each sampler and each episode draws from its own
//! independent sequence. The integer, float and Gaussian conversions below
//! are spelled out so other implementations can reproduce the goldens.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub const PERCEPTUAL: &str = "perceptual";
pub const STRUCTURAL: &str = "structural";
pub const SYMBOLIC: &str = "symbolic";
pub const TASK: &str = "task";
pub const TRIAL: &str = "trial";
pub const AGENT: &str = "agent";

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// `mix64(mix64(root ^ fnv1a(label)) ^ index)`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    mix64(mix64(root ^ label_hash(label)) ^ index)
}

#[derive(Clone, Debug)]
pub struct Stream {
    inner: Xoshiro256PlusPlus,
}

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Stream {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn derived(root: u64, label: &str, index: u64) -> Self {
        Stream::from_seed(derive_seed(root, label, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n` by threshold rejection: draws below
    /// `(2^64 - n) mod n` are discarded, the rest reduced modulo `n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        items[self.index(items.len())]
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw, Box-Muller cosine branch:
    /// `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform point on the unit 2-sphere: a normalized triple of normals.
    pub fn unit_sphere(&mut self) -> [f64; 3] {
        loop {
            let v = [self.normal(), self.normal(), self.normal()];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-12 {
                return v.map(|x| x / n);
            }
        }
    }
}
