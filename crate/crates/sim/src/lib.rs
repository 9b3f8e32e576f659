//! Forward channel model for decoy-state BB84 runs: expected detection
//! counts per (source, measured basis) cell from the system constants and a
//! protocol configuration, plus deterministic Poisson sampling of finite
//! realizations.
//!
//! The model is the standard weak-coherent-pulse one: double-detector dark
//! coincidences, exponential fiber loss with fixed receiver insertion loss,
//! misalignment errors, optional multiplicative after-pulsing, and a
//! per-basis dead-time live fraction.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod channel;
pub mod sampling;

pub use channel::{
    dark_coincidence, expected_counts, expected_yields, photon_error_yield, photon_yield,
    AfterpulseModel, ChannelInstance, ExpectedCounts, GainPair, SimError, SimOptions,
};
pub use sampling::sample_counts;
