//! Seeded, splittable random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// The generator every protocol run draws from.
pub type StreamRng = ChaCha12Rng;

/// Root stream for a run identified by `seed`.
pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Independent sub-stream `index` of the run identified by `seed`.
///
/// Sub-streams share the key but use distinct ChaCha stream ids, so trial
/// `i` of an experiment never overlaps trial `j`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Splits a child stream off `parent`, advancing the parent by one seed.
pub fn fork<R: RngCore + ?Sized>(parent: &mut R) -> StreamRng {
    let mut seed = <StreamRng as SeedableRng>::Seed::default();
    parent.fill_bytes(&mut seed);
    StreamRng::from_seed(seed)
}
