use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator on an independent stream, so separate consumers of one
/// seed never share random draws.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
