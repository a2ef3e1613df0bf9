//! Deterministic randomness keyed by `(seed, stream)`.
//!
//! Every randomized operation takes an explicit `u64` seed and derives one
//! ChaCha8 stream per logical unit of work (per trial, per restart, per
//! sample). Streams with the same seed and different stream ids are
//! independent, so trials can run in parallel in any order and still produce
//! the sequence a serial run would: reproducibility is a function of
//! `(seed, stream, draw index)` alone, never of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Returns the RNG for logical stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a uniform point of `{0,1}^n` as the low `n` bits of a `u32`.
///
/// `n <= 24` everywhere in this crate, so a `u32` always holds a point.
#[inline]
pub fn gen_point(rng: &mut ChaCha8Rng, n: usize) -> u32 {
    debug_assert!(n <= 32);
    if n == 32 {
        rng.gen::<u32>()
    } else {
        rng.gen::<u32>() & ((1u32 << n) - 1)
    }
}

/// Bernoulli draw with probability `p`, consuming exactly one `u64`.
///
/// Uses the top 53 bits so the comparison is against an exactly
/// representable dyadic rational; `p = 0` never fires and `p = 1` always
/// does.
#[inline]
pub fn gen_bool(rng: &mut ChaCha8Rng, p: f64) -> bool {
    let u = (rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p
}

/// Uniform draw from `0..bound` by rejection, so every bound is exact.
#[inline]
pub fn gen_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    if bound.is_power_of_two() {
        return rng.gen::<u64>() & (bound - 1);
    }
    // Zone rejection: accept draws below the largest multiple of `bound`.
    let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
    loop {
        let v = rng.gen::<u64>();
        if v <= zone {
            return v % bound;
        }
    }
}
