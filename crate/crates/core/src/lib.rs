//! Finite-key security analysis for decoy-state BB84 with asymmetric basis
//! detector efficiencies.
//!
//! The crate bounds the secret-key rate of a measured (or simulated) run
//! from its observed detection counts alone:
//!
//! - [`model`] — protocol variants, pulse sources, receiver constants,
//!   photon-number statistics and evaluation-policy switches;
//! - [`stats`] — multiplicative-Chernoff confidence intervals for counts;
//! - [`counts`] — observed count tables keyed by (source, measured basis);
//! - [`decoy`] — single-photon yield/phase-error bounds and the admissible
//!   vacuum-yield rectangle;
//! - [`rate`] — the worst-case key-rate functional over that rectangle.
//!
//! The 4-intensity protocol (per-basis decoy/signal intensity pairs with a
//! biased receiver basis choice) is the primary subject; the two
//! 3-intensity variants (with a vacuum source, on balanced or unbalanced
//! receivers) run through the same machinery with the vacuum-yield
//! rectangle read off the measured vacuum source.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod counts;
pub mod decoy;
pub mod model;
pub mod rate;
pub mod stats;

pub use counts::{CellCounts, CountsError, CountsTable};
pub use decoy::{theta_correction, AxisInterval, DecoyEstimator, EstimateError, VacuumRectangle};
pub use model::{
    binary_entropy, poisson_weight, poisson_weights, Basis, ChernoffArg, EnginePolicy,
    MinPolicy, ModelError, ProtocolConfig, Source, SystemModel, ThetaLogBase, Variant,
    PHOTON_CUTOFF,
};
pub use rate::{key_rate, rate_3intensity, BasisBreakdown, InfeasibleReason, KeyRateReport};
pub use stats::{chernoff_log_term, relative_deviation, yield_interval, YieldInterval};
