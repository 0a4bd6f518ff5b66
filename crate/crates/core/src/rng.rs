//! Counter-based random draws.
//!
//! Every draw is a pure function of `(seed, j, l)`: no generator state is
//! carried between coordinates, so results do not depend on enumeration
//! order or on how trials are spread across threads. Trial seeds are
//! themselves derived from `(master_seed, stream, trial)`.

use std::f64::consts::PI;

use crate::lattice::Index;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const KEY_J: u64 = 0xd1b5_4a32_d192_ed03;
const KEY_L: u64 = 0xabc9_8388_fb8f_ac03;
const LANE_1: u64 = 0x8cb9_2ba7_2f3d_8dd7;
const LANE_2: u64 = 0x5851_f42d_4c95_7f2d;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn key(seed: u64, nu: Index) -> u64 {
    let h = mix64(seed.wrapping_add(GOLDEN));
    let h = mix64(h ^ u64::from(nu.j).wrapping_add(1).wrapping_mul(KEY_J));
    mix64(h ^ u64::from(nu.l).wrapping_add(1).wrapping_mul(KEY_L))
}

#[inline]
fn unit_open_closed(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

#[inline]
fn unit_closed_open(bits: u64) -> f64 {
    // [0, 1)
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard Gaussian draw keyed by `(seed, ν)` (Box–Muller).
#[inline]
pub fn standard_normal(seed: u64, nu: Index) -> f64 {
    let k = key(seed, nu);
    let u1 = unit_open_closed(mix64(k ^ LANE_1));
    let u2 = unit_closed_open(mix64(k ^ LANE_2));
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Rademacher sign `±1` keyed by `(seed, ν)`.
#[inline]
pub fn sign(seed: u64, nu: Index) -> f64 {
    if mix64(key(seed, nu) ^ LANE_2) >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Seed for one Monte Carlo trial.
#[inline]
pub fn trial_seed(master_seed: u64, stream: u64, trial: u64) -> u64 {
    let h = mix64(master_seed ^ GOLDEN);
    let h = mix64(h ^ stream.wrapping_mul(KEY_J));
    mix64(h ^ trial.wrapping_mul(KEY_L).wrapping_add(LANE_1))
}
