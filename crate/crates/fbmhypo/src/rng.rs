//! Seeded generators. Every ensemble member draws from its own ChaCha
//! stream so results do not depend on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type PathRng = ChaCha8Rng;

/// Generator for ensemble member `stream` of an experiment seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> PathRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Fill `buf` with independent N(0, sd²) draws.
pub fn fill_normal(rng: &mut impl Rng, buf: &mut [f64], sd: f64) {
    for v in buf {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}
