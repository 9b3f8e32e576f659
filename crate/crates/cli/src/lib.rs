//! Command-line surface for the decoy-state BB84 finite-key toolkit:
//! configuration parsing, count-table ingestion/emission, and report
//! rendering shared by the `decoyrate` binary and its tests.
//!
//! Subcommand semantics (realized in the binary):
//!
//! - `rate` — counts + config → worst-case key-rate report;
//! - `simulate` — config (+ optional seed) → expected or sampled counts CSV;
//! - `optimize` — system + distance + variant → best protocol parameters;
//! - `sweep` — distance range → per-variant optimized rates as CSV;
//! - `compare` — two rate records → ratio table.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/invariant error, 3 zero
//! key under `--strict`.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod config;
pub mod countsio;
pub mod report;

pub use config::{parse_config, parse_config_str, ConfigError, FileConfig};
pub use countsio::{
    emit_counts, parse_counts, parse_counts_str, write_counts, CountsIoError, COUNTS_HEADER,
};
pub use report::{
    compare_reports, optimize_record, rate_record, rate_table, Record, RecordError,
};

/// Header of the `sweep` CSV output.
pub const SWEEP_HEADER: &str = "distance_km,variant,R_per_pulse,bps";

/// Process exit codes of the `decoyrate` binary.
pub mod exit {
    /// Success.
    pub const OK: i32 = 0;
    /// Usage error (bad flags, missing arguments).
    pub const USAGE: i32 = 1;
    /// Data or invariant error (unparseable/invalid inputs).
    pub const DATA: i32 = 2;
    /// `rate --strict` computed a zero key rate.
    pub const ZERO_KEY: i32 = 3;
}
