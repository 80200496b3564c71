//! Thompson sampling on finite Bayesian bandits, analysed through lossy
//! compression of the optimal parameter.
//!
//! Parameters and actions are finite sets of vectors in the closed unit ball.
//! Everything information-theoretic is computed exactly by enumeration, in
//! nats, with compensated summation.

// `!(x >= 0.0)` is how NaN gets rejected; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod compression;
pub mod error;
pub mod inference;
pub mod information;
pub mod model;
pub mod numerics;
pub mod policy;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for sub-experiment `stream` of a seeded run.
/// Independent streams let work be spread over threads without changing
/// any drawn number.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
