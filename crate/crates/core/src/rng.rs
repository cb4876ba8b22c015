//! Deterministic random stream derivation.
//!
//! Every run is driven by one master seed. Independent consumers (environment
//! outcomes, pair selection, replay schedules) each get their own labeled
//! stream derived from that seed, so changing how many draws one consumer
//! makes never perturbs another consumer's values. Replay schedule bits are
//! additionally counter-based: the bit for a given (episode, round, duration)
//! is a pure function of its labels, independent of query order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 generator. Used as a mixing primitive only.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(state: &mut u64, value: u64) {
    *state ^= value;
    splitmix64(state);
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a; labels are short static strings.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent ChaCha stream from `(master, label, index)`.
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut state = master;
    absorb(&mut state, label_hash(label));
    absorb(&mut state, index);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Counter-based uniform draw in `[0, 1)`, a pure function of its labels.
pub fn unit_hash(master: u64, label: &str, parts: &[u64]) -> f64 {
    let mut state = master;
    absorb(&mut state, label_hash(label));
    for p in parts {
        absorb(&mut state, *p);
    }
    // Two extra scrambles so nearby counters decorrelate.
    splitmix64(&mut state);
    let bits = splitmix64(&mut state);
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
