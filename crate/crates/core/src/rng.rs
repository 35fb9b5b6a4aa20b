//! Seeded, order-independent random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived by hashing a master seed with a sequence of tags. Two streams with
//! different tag paths are statistically independent, and a stream does not
//! depend on how many other streams were opened before it. This lets paths,
//! classes and repetitions be generated in any order (or in parallel) with
//! identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags used to split a repetition seed into independent sub-streams.
pub mod tag {
    pub const DATA: u64 = 0x6461_7461;
    pub const TRAIN: u64 = 0x7472_6169;
    pub const TEST: u64 = 0x7465_7374;
    pub const INIT: u64 = 0x696e_6974;
    pub const DIRECT: u64 = 0x6469_7263;
    pub const SIZES: u64 = 0x7369_7a65;
    pub const BAYES: u64 = 0x6261_7965;
    pub const REP: u64 = 0x7265_7065;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A node in the seed tree. Cheap to copy; [`SeedKey::child`] descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedKey(u64);

impl SeedKey {
    pub fn new(master: u64) -> Self {
        SeedKey(splitmix64(master))
    }

    pub fn child(self, tag: u64) -> Self {
        SeedKey(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, tags: &[u64]) -> Self {
        tags.iter().fold(self, |k, &t| k.child(t))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> Rng {
        Rng::seed_from_u64(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn children_are_distinct_and_stable() {
        let k = SeedKey::new(7);
        assert_ne!(k.child(0), k.child(1));
        assert_eq!(k.child(3), SeedKey::new(7).child(3));
        assert_ne!(k.path(&[1, 2]), k.path(&[2, 1]));
    }

    #[test]
    fn streams_reproduce() {
        let a: Vec<u64> = SeedKey::new(1).child(5).rng().random_iter().take(4).collect();
        let b: Vec<u64> = SeedKey::new(1).child(5).rng().random_iter().take(4).collect();
        assert_eq!(a, b);
    }
}
