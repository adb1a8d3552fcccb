//! Deterministic random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream keyed by
//! `(master seed, label, index)`, so results depend only on what is computed,
//! never on which worker thread computed it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `label` and `index` under `master`.
pub fn stream(master: u64, label: &str, index: u64) -> StreamRng {
    let mut state = master ^ fnv1a(label).rotate_left(17);
    let _ = splitmix(&mut state);
    state ^= index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Derives a child master seed, for handing a whole sub-experiment its own
/// namespace of streams.
pub fn child_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut state = master ^ fnv1a(label) ^ index.rotate_left(32);
    splitmix(&mut state)
}
