use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream reserved for the design matrix.
const DESIGN_STREAM: u64 = 0;

/// Generator for replication `index`; depends only on `(seed, index)`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Generator for the campaign's design matrix.
pub fn design_rng(seed: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(DESIGN_STREAM);
    rng
}
