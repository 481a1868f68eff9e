//! Stable seed derivation. Independent work units (recordings, sweep cells)
//! get their own RNG seeds derived from a master seed plus identifying
//! fields, so results never depend on scheduling or execution order.
//!
//! The mixer is SplitMix64 applied as an absorb-then-finalize chain. It is
//! fixed for the life of the file formats: changing it would change every
//! derived dataset and sweep result.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a list of identifying values.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

/// Absorb a string (e.g. a subject id) into a single u64.
pub fn hash_str(s: &str) -> u64 {
    let bytes = s.as_bytes();
    let mut state = splitmix64(bytes.len() as u64);
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        state = splitmix64(state ^ u64::from_le_bytes(word));
    }
    state
}
