//! Per-replicate RNG streams and the replicate runner.
//!
//! A replicate seed is `mix(master + φ·(index + 1))`, where `φ` is the odd
//! golden-ratio constant and `mix` is the SplitMix64 finalizer. Both maps
//! are bijections of `u64`, so seeds are distinct for distinct indices
//! under the same master seed. Each seed keys a ChaCha8 stream.
//!
//! Replicates run in parallel when the `parallel` feature is on; results
//! are always collected in index order so the reduction never depends on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Disjoint seed domains inside one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedDomain {
    Particle = 1,
    Diffusion = 2,
    DualityLeft = 3,
    DualityRight = 4,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_replicate_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Master seed for one domain of an experiment.
pub fn domain_seed(master: u64, domain: SeedDomain) -> u64 {
    mix64(master ^ mix64(domain as u64))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Run `f(index, seed)` for every replicate, returning results in index
/// order.
pub fn replicate_map<T, F>(count: usize, master: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|i| f(i, derive_replicate_seed(master, i as u64)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count)
            .map(|i| f(i, derive_replicate_seed(master, i as u64)))
            .collect()
    }
}
