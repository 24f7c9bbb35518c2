//! Seeded RNG substreams. Each concern (scene layout, perception noise)
//! draws from its own stream so toggling one never shifts another's values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable FNV-1a hash of the substream name; used as the ChaCha stream id.
fn stream_id(name: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Independent named substream of the episode seed.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

pub const STREAM_SCENE: &str = "scene";
pub const STREAM_PERCEPTION: &str = "perception";
