//! Named, independent random substreams derived from a single root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root of the seed tree. Each subsystem asks for its own named stream so that
/// consuming randomness in one place never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn seed_for(&self, name: &str) -> u64 {
        splitmix(self.root ^ splitmix(fnv1a(name.as_bytes())))
    }

    pub fn stream(&self, name: &str) -> Rng {
        Rng::seed_from_u64(self.seed_for(name))
    }

    /// Stream for a named subsystem at a particular step (epoch, video, ...).
    pub fn indexed_stream(&self, name: &str, index: u64) -> Rng {
        Rng::seed_from_u64(splitmix(self.seed_for(name) ^ splitmix(index)))
    }
}
