//! Deterministic finite-run sampling of expected counts.
//!
//! Each cell draws from its own RNG substream so that resampling is
//! order-independent and parallelizable: substream seed = run seed XOR
//! (cell ordinal + 1)·φ₆₄, where φ₆₄ = 0x9E3779B97F4A7C15 is the 64-bit
//! golden-ratio multiplier and the ordinal is the cell's position in the
//! stable (source, basis) order.

use decoyrate_core::{CellCounts, CountsTable};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};

use crate::channel::ExpectedCounts;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn cell_rng(seed: u64, ordinal: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ordinal.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// Draw one finite realization of the expected counts.
///
/// Every cell's total is Poisson with the cell's mean; its error count is
/// binomial over that sampled total with success probability
/// mean_errors/mean. Zero-mean cells sample zero. The result is fully
/// determined by `seed`.
pub fn sample_counts(expected: &ExpectedCounts, seed: u64) -> CountsTable {
    let mut table = CountsTable::new();
    for (ordinal, (source, basis, mean, mean_err)) in expected.iter().enumerate() {
        let mut rng = cell_rng(seed, ordinal as u64);
        let total = if mean > 0.0 {
            Poisson::new(mean).expect("positive finite mean").sample(&mut rng)
        } else {
            0.0
        };
        let errors = if total > 0.0 && mean > 0.0 {
            let p = (mean_err / mean).clamp(0.0, 1.0);
            Binomial::new(total as u64, p)
                .expect("probability in [0, 1]")
                .sample(&mut rng) as f64
        } else {
            0.0
        };
        table
            .insert(
                source,
                basis,
                CellCounts {
                    total,
                    errors: Some(errors),
                },
            )
            .expect("sampled cells are valid by construction");
    }
    table
}
