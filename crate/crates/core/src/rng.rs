use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used everywhere in the crate.
pub type ExperimentRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of a base seed.
pub fn substream(seed: u64, stream: u64) -> ExperimentRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
