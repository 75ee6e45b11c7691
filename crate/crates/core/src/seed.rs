//! Labeled seed derivation.
//!
//! All randomness of a run descends from one master seed. Each consumer (a
//! party, a phase, a shot, a retry attempt) gets its own stream keyed by a
//! label path, so adding a draw in one stream never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { seed: master }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, label: &str) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(fnv1a(label.as_bytes()))),
        }
    }

    pub fn index(&self, i: u64) -> Self {
        Self {
            seed: splitmix64(self.seed.rotate_left(17) ^ splitmix64(i.wrapping_add(0x5851_f42d))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}
