use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a list of stream coordinates (subject index,
/// outer iteration, purpose tag, ...) into an independent 64-bit seed.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix(master), |acc, &c| splitmix(acc ^ splitmix(c.wrapping_add(GOLDEN))))
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags keep draws for different purposes apart under one master seed.
pub(crate) const TAG_GROUP_INIT: u64 = 1;
pub(crate) const TAG_THETA: u64 = 2;
pub(crate) const TAG_BATCH: u64 = 3;
pub(crate) const TAG_ADAPT: u64 = 4;
pub(crate) const TAG_SIGNATURES: u64 = 10;
pub(crate) const TAG_EVENTS: u64 = 11;
pub(crate) const TAG_NOISE: u64 = 12;
pub(crate) const TAG_MIXING: u64 = 13;
pub(crate) const TAG_SHUFFLE: u64 = 14;
