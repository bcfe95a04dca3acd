use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Counter-based generator; each chain gets its own stream of one master seed.
pub type ChainRng = ChaCha12Rng;

/// Stream `chain_index` of `master_seed`.
pub fn chain_rng(master_seed: u64, chain_index: u64) -> ChainRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(chain_index);
    rng
}
