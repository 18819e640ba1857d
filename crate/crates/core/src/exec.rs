//! Deterministic random streams and chunked path execution.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, purpose, index)`,
//! and chunk results come back in chunk order, so output does not depend on the
//! number of worker threads.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Paths per work unit. Fixed so that chunk boundaries never depend on thread count.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Stream label so that different engines never share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    BinomialHedge,
    DiffusionHedge,
    MultifactorPricing,
    MultifactorHedge,
    JumpPricing,
    JumpHedge,
    JumpOneStep,
    Calibration,
    Synthetic,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::BinomialHedge => 1,
            Purpose::DiffusionHedge => 2,
            Purpose::MultifactorPricing => 3,
            Purpose::MultifactorHedge => 4,
            Purpose::JumpPricing => 5,
            Purpose::JumpHedge => 6,
            Purpose::JumpOneStep => 7,
            Purpose::Calibration => 8,
            Purpose::Synthetic => 9,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed; used to key nested streams such as `(path, step)`.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key))
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose.tag()));
    rng.set_stream(index);
    rng
}

/// Runs `f` over `[0, n)` in fixed chunks and returns the per-chunk results in order.
pub fn map_chunks<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let range = move |c: usize| c * CHUNK..((c + 1) * CHUNK).min(n);
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().map(|c| f(range(c))).collect()
        }
        _ => (0..n_chunks).map(|c| f(range(c))).collect(),
    }
}

/// Runs `f` on each index, in parallel when allowed, preserving order.
pub fn map_indexed<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}
