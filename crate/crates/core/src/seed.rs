//! Stream-seed derivation.
//!
//! Every stochastic stage draws from a stream seeded by
//! `derive_seed(master, frame_id, stage)`, so outputs do not depend on worker
//! count or scheduling order. The mixer is fixed:
//!
//! ```text
//! h_f = fnv1a64(frame_id)
//! h_s = fnv1a64(stage)
//! s   = splitmix64(master)
//! s   = splitmix64(s ^ h_f)
//! s   = splitmix64(s ^ h_s.rotate_left(32))
//! ```
//!
//! where `splitmix64(z)` is the finalizer of Steele et al.'s SplitMix64 applied
//! to `z + 0x9E3779B97F4A7C15` (wrapping).

/// Stage tag for gas-cloud generation.
pub const STAGE_GENERATE: &str = "gen";
/// Stage tag for placement during augmentation.
pub const STAGE_AUGMENT: &str = "augment";
/// Stage tag for evaluation-time noise injection.
pub const STAGE_INJECT: &str = "inject";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes already-hashed frame and stage identifiers into a stream seed.
pub fn mix(master_seed: u64, frame_hash: u64, stage_hash: u64) -> u64 {
    let s = splitmix64(master_seed);
    let s = splitmix64(s ^ frame_hash);
    splitmix64(s ^ stage_hash.rotate_left(32))
}

pub fn derive_seed(master_seed: u64, frame_id: &str, stage: &str) -> u64 {
    mix(master_seed, fnv1a64(frame_id), fnv1a64(stage))
}
