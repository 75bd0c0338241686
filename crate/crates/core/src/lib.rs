//! Projection-free online convex optimization with stochastic and bandit
//! feedback, and online gradient boosting driven by noisy bandit feedback.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: convex decision sets (balls and boxes) with Euclidean
//!   projection, linear minimization and shrinking.
//! * [`losses`]: convex loss families with declared constants, the noisy
//!   bandit query channel and spherical (FKM) gradient estimation.
//! * [`olo`]: online linear optimizers (follow-the-perturbed-leader and
//!   projected online gradient descent) and the regret ledger.
//! * [`sfw`]: the N-learner online Frank-Wolfe meta-algorithm, for stochastic
//!   gradients and for multi-point bandit feedback.
//! * [`boosting`]: online gradient boosting of weak online learners from noisy
//!   bandit feedback, with a linear weak learner.
//!
//! Points are dense `nalgebra` vectors; all randomness flows from seeded
//! ChaCha streams so that runs are bit-reproducible.

pub mod boosting;
mod error;
pub mod geometry;
pub mod losses;
pub mod olo;
pub mod sfw;
pub mod trace;

pub use error::{Error, Result};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A point in `R^d`.
pub type Point = DVector<f64>;

/// The random source used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Returns an independent, reproducible stream for `(seed, stream)`.
///
/// Streams with the same seed but different `stream` ids never overlap.
pub fn seeded_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn check_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
