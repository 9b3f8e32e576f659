//! Expected detection statistics of a weak-coherent-pulse run.
//!
//! The channel is a fiber of `distance_km` with loss `loss_coeff_db_per_km`
//! plus a fixed receiver insertion loss, followed by one detector pair per
//! measurement basis. Per (source, measured-basis) cell the model gives
//!
//! ```text
//!   Y₀ = 2·d·(1−d)                        (double dark-count coincidence)
//!   Q  = 1 − (1−Y₀)·e^{−η_eff·μ}          (total gain)
//!   EQ = Y₀/2 + e_mis·(1 − e^{−η_eff·μ})  (matched-basis error gain)
//!   EQ = Q/2                              (mismatched basis: random sift)
//! ```
//!
//! with optional after-pulse inflation and a per-basis dead-time live
//! fraction (see [`SimOptions`]).

use std::collections::BTreeMap;

use decoyrate_core::{
    Basis, CellCounts, CountsError, CountsTable, ModelError, ProtocolConfig, Source, SystemModel,
    Variant,
};
use thiserror::Error;

/// Truncation order for per-photon-number expansions. Poisson weights above
/// this photon number are negligible for every intensity the protocol
/// admits (μ < 10 ⇒ tail mass < 1e-12).
pub use decoyrate_core::PHOTON_CUTOFF;

/// Simulation failure modes.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid protocol or system inputs.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The generated table violated count invariants (indicates a bug).
    #[error(transparent)]
    Counts(#[from] CountsError),
}

/// After-pulse handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AfterpulseModel {
    /// Ignore after-pulsing entirely.
    Off,
    /// Inflate each gain by (1 + A) and add half-random errors A·Q/2.
    #[default]
    Multiplicative,
}

impl std::str::FromStr for AfterpulseModel {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "off" => Ok(AfterpulseModel::Off),
            "multiplicative" => Ok(AfterpulseModel::Multiplicative),
            other => Err(ModelError::UnknownPolicy {
                switch: "afterpulse-model",
                value: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for AfterpulseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AfterpulseModel::Off => write!(f, "off"),
            AfterpulseModel::Multiplicative => write!(f, "multiplicative"),
        }
    }
}

/// Forward-model switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// After-pulse handling (default: multiplicative inflation).
    pub afterpulse: AfterpulseModel,
    /// Apply the per-basis dead-time live fraction (default: on).
    pub dead_time: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            afterpulse: AfterpulseModel::Multiplicative,
            dead_time: true,
        }
    }
}

impl SimOptions {
    /// Pure detection model: no after-pulsing, no dead time. Under these
    /// options the expected counts match the per-photon-number expansion
    /// exactly.
    pub fn noiseless_detector() -> Self {
        SimOptions {
            afterpulse: AfterpulseModel::Off,
            dead_time: false,
        }
    }
}

/// Channel attenuation resolved for a concrete distance and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelInstance {
    /// Fiber length in km.
    pub distance_km: f64,
    /// Line transmittance 10^{−(loss·L + extra)/10}, receiver optics
    /// included, detectors excluded.
    pub transmittance: f64,
    /// Effective end-to-end efficiency per measured basis
    /// (transmittance × detector efficiency), indexed by [`Basis::index`].
    pub eta_eff: [f64; 2],
}

impl ChannelInstance {
    /// Resolve the channel for a distance and variant. The symmetric
    /// 3-intensity variant attenuates the better detector down to the worse
    /// one, so both bases see min(η_Z, η_X).
    pub fn new(sys: &SystemModel, distance_km: f64, variant: Variant) -> Result<Self, SimError> {
        sys.validate()?;
        if !distance_km.is_finite() {
            return Err(SimError::Model(ModelError::NonFinite));
        }
        if distance_km < 0.0 {
            return Err(SimError::Model(ModelError::NegativeDistance(distance_km)));
        }
        let db = sys.loss_coeff_db_per_km * distance_km + sys.extra_bob_loss_db;
        let transmittance = 10f64.powf(-db / 10.0);
        let eta_eff = if variant.balances_detectors() {
            let eta = sys.eta_z.min(sys.eta_x);
            [transmittance * eta, transmittance * eta]
        } else {
            [transmittance * sys.eta_z, transmittance * sys.eta_x]
        };
        Ok(ChannelInstance {
            distance_km,
            transmittance,
            eta_eff,
        })
    }

    /// Effective efficiency seen by pulses measured in `basis`.
    pub fn eta(&self, basis: Basis) -> f64 {
        self.eta_eff[basis.index()]
    }
}

/// Total and error gain of one (intensity, measured basis) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPair {
    /// Detection probability per pulse.
    pub gain: f64,
    /// Joint probability of detection and sift error per pulse.
    pub error_gain: f64,
}

/// Double dark-count coincidence probability Y₀ = 2·d·(1−d).
pub fn dark_coincidence(sys: &SystemModel) -> f64 {
    2.0 * sys.dark_rate * (1.0 - sys.dark_rate)
}

/// Gain and error gain for intensity `mu` measured in `basis`.
/// `same_basis` marks preparation and measurement bases matching; a
/// mismatched (or vacuum) pulse gives a random sift outcome, so its error
/// gain is Q/2.
pub fn expected_yields(
    sys: &SystemModel,
    ch: &ChannelInstance,
    mu: f64,
    basis: Basis,
    same_basis: bool,
    afterpulse: AfterpulseModel,
) -> GainPair {
    let y0 = dark_coincidence(sys);
    let missed = (-ch.eta(basis) * mu).exp();
    let gain = 1.0 - (1.0 - y0) * missed;
    let error_gain = if same_basis {
        0.5 * y0 + sys.misalignment * (1.0 - missed)
    } else {
        0.5 * gain
    };
    let (gain, error_gain) = match afterpulse {
        AfterpulseModel::Off => (gain, error_gain),
        AfterpulseModel::Multiplicative => (
            gain * (1.0 + sys.afterpulse),
            error_gain + 0.5 * sys.afterpulse * gain,
        ),
    };
    GainPair {
        gain,
        error_gain: error_gain.min(gain),
    }
}

/// Yield of a k-photon pulse: y_k = 1 − (1−Y₀)·(1−η)^k. The Poisson
/// mixture of these over k reproduces the coherent-pulse gain exactly
/// (after-pulsing off).
pub fn photon_yield(sys: &SystemModel, ch: &ChannelInstance, basis: Basis, k: usize) -> f64 {
    let y0 = dark_coincidence(sys);
    1.0 - (1.0 - y0) * (1.0 - ch.eta(basis)).powi(k as i32)
}

/// Joint probability that a matched-basis k-photon pulse clicks *and*
/// sifts wrong: Y₀/2 + e_mis·(1 − (1−η)^k). Its Poisson mixture over k is
/// the matched error gain.
pub fn photon_error_yield(sys: &SystemModel, ch: &ChannelInstance, basis: Basis, k: usize) -> f64 {
    let y0 = dark_coincidence(sys);
    0.5 * y0 + sys.misalignment * (1.0 - (1.0 - ch.eta(basis)).powi(k as i32))
}

/// Expected (mean) counts per cell for a full run of `sys.pulses` pulses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpectedCounts {
    pub(crate) cells: BTreeMap<(Source, Basis), (f64, f64)>,
}

impl ExpectedCounts {
    /// Expected total counts of a cell (0 if absent).
    pub fn mean(&self, source: Source, basis: Basis) -> f64 {
        self.cells.get(&(source, basis)).map_or(0.0, |c| c.0)
    }

    /// Expected error counts of a cell (0 if absent).
    pub fn mean_errors(&self, source: Source, basis: Basis) -> f64 {
        self.cells.get(&(source, basis)).map_or(0.0, |c| c.1)
    }

    /// Iterate cells in a stable (source, basis) order.
    pub fn iter(&self) -> impl Iterator<Item = (Source, Basis, f64, f64)> + '_ {
        self.cells.iter().map(|(&(s, b), &(m, e))| (s, b, m, e))
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Whether no cells are present.
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// View the means themselves as a (fractional) counts table, error
    /// counts included for every cell.
    pub fn to_counts_table(&self) -> Result<CountsTable, CountsError> {
        let mut table = CountsTable::new();
        for (source, basis, mean, mean_err) in self.iter() {
            table.insert(
                source,
                basis,
                CellCounts {
                    total: mean,
                    errors: Some(mean_err),
                },
            )?;
        }
        Ok(table)
    }
}

/// Expected counts for every cell of the run: each active source crossed
/// with each measured basis (vacuum included under the 3-intensity
/// variants). Cell mean = Q·p_src·q_basis·N, errors analogously; the
/// dead-time live fraction divides every cell of a basis by
/// 1 + (per-detector click rate)·τ_dead when enabled.
pub fn expected_counts(
    sys: &SystemModel,
    cfg: &ProtocolConfig,
    opts: &SimOptions,
) -> Result<ExpectedCounts, SimError> {
    let ch = ChannelInstance::new(sys, cfg.distance_km, cfg.variant)?;
    let mut cells = BTreeMap::new();
    for basis in Basis::ALL {
        let q = cfg.q(basis);
        // Gains first: the dead-time factor depends on the total click
        // rate in this basis across all sources.
        let mut gains = Vec::new();
        let mut rate_per_pulse = 0.0;
        for source in cfg.sources() {
            let matched = source.basis() == Some(basis);
            let gp = expected_yields(sys, &ch, cfg.mu(source), basis, matched, opts.afterpulse);
            rate_per_pulse += cfg.p(source) * gp.gain;
            gains.push((source, gp));
        }
        let live = if opts.dead_time {
            // Two detectors share a basis's clicks; each one goes blind
            // for τ_dead after a click.
            let per_detector_hz = 0.5 * q * rate_per_pulse * sys.clock_hz;
            1.0 / (1.0 + per_detector_hz * sys.dead_time_s)
        } else {
            1.0
        };
        for (source, gp) in gains {
            let scale = cfg.p(source) * q * sys.pulses * live;
            cells.insert(
                (source, basis),
                (gp.gain * scale, gp.error_gain * scale),
            );
        }
    }
    Ok(ExpectedCounts { cells })
}
