//! Seeded random streams.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the run seed and a
//! `(domain, index)` stream id, so a restart's draws do not depend on how many
//! threads run or in which order restarts finish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{vector_norm, Norm};

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Distinct call sites use distinct domains.
pub mod domain {
    pub const OPERATOR_NORM: u32 = 1;
    pub const DENOMINATOR: u32 = 2;
    pub const DICTIONARY: u32 = 3;
    pub const PAIR_SEARCH: u32 = 4;
    pub const INITIAL_PAIRS: u32 = 5;
    pub const REPRESENTATION: u32 = 6;
    pub const SUITE: u32 = 7;
    pub const GENERATOR: u32 = 8;
    pub const POLY: u32 = 9;
}

pub fn stream(seed: u64, domain: u32, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 32) ^ index);
    rng
}

/// Derive a child seed, e.g. for a sub-computation inside a round.
pub fn child_seed(seed: u64, domain: u32, index: u64) -> u64 {
    stream(seed, domain, index).random()
}

pub fn gaussian_vec(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Gaussian direction rescaled to the unit sphere of `ℓ_r`.
pub fn unit_vec(rng: &mut StreamRng, n: usize, r: Norm) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let s = vector_norm(&v, r);
        if s > 1e-300 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
