//! Named, reproducible random streams derived from a single root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derives independent child streams from a root seed by label.
///
/// `SeedTree::new(7).child("client").index(3)` always yields the same stream,
/// regardless of how many other streams were drawn before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { seed: splitmix(root ^ 0x5eed_f3a1_0000_0001) }
    }

    pub fn child(&self, label: &str) -> SeedTree {
        SeedTree { seed: splitmix(self.seed ^ fnv1a(label.as_bytes())) }
    }

    pub fn index(&self, i: u64) -> SeedTree {
        SeedTree { seed: splitmix(self.seed.wrapping_add(splitmix(i.wrapping_add(0x9e37)))) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self) -> Rng {
        Rng::seed_from_u64(self.seed)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws one standard-normal variate.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}
