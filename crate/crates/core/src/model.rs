//! Protocol and hardware descriptions shared by the estimator, simulator and
//! optimizer: bases, pulse sources, intensity/probability layouts, receiver
//! constants, photon-number statistics and the evaluation-policy switches.

use thiserror::Error;

/// Photon-number cutoff for series expansions of weak-coherent-pulse
/// statistics. At the intensities in scope (μ ≤ 1) the Poisson weight at
/// k = 40 is below 1e-80, far under f64 noise.
pub const PHOTON_CUTOFF: usize = 40;

/// Largest tolerated deviation of a probability column from 1 before
/// renormalization is refused (published columns carry 3-digit rounding).
pub const PROBABILITY_SUM_TOLERANCE: f64 = 5e-3;

/// Measurement / preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Basis {
    /// Key basis (majority basis on the receiver).
    Z,
    /// Monitoring basis (minority basis on the receiver).
    X,
}

impl Basis {
    /// Both bases, in canonical order.
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    /// The conjugate basis (Z ↔ X).
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }

    /// Stable index for array-backed per-basis tables.
    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(ModelError::UnknownBasis(other.to_string())),
        }
    }
}

/// One of Alice's pulse sources. Each preparation basis has a decoy source
/// (`Z1`/`X1`, the weaker intensity) and a signal source (`Z2`/`X2`); the
/// 3-intensity variants add a shared vacuum source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    /// Z-basis decoy source (intensity μ_Z1).
    Z1,
    /// Z-basis signal source (intensity μ_Z2).
    Z2,
    /// X-basis decoy source (intensity μ_X1).
    X1,
    /// X-basis signal source (intensity μ_X2).
    X2,
    /// Vacuum source (3-intensity variants only).
    Vacuum,
}

impl Source {
    /// The four light-carrying sources, in canonical order.
    pub const PULSED: [Source; 4] = [Source::Z1, Source::Z2, Source::X1, Source::X2];

    /// Preparation basis of this source; `None` for the vacuum source.
    pub fn basis(self) -> Option<Basis> {
        match self {
            Source::Z1 | Source::Z2 => Some(Basis::Z),
            Source::X1 | Source::X2 => Some(Basis::X),
            Source::Vacuum => None,
        }
    }

    /// Stable index for array-backed per-source tables (pulsed sources only).
    pub fn index(self) -> Option<usize> {
        match self {
            Source::Z1 => Some(0),
            Source::Z2 => Some(1),
            Source::X1 => Some(2),
            Source::X2 => Some(3),
            Source::Vacuum => None,
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Z1 => "Z1",
            Source::Z2 => "Z2",
            Source::X1 => "X1",
            Source::X2 => "X2",
            Source::Vacuum => "VAC",
        })
    }
}

impl std::str::FromStr for Source {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "Z1" | "z1" => Ok(Source::Z1),
            "Z2" | "z2" => Ok(Source::Z2),
            "X1" | "x1" => Ok(Source::X1),
            "X2" | "x2" => Ok(Source::X2),
            "VAC" | "vac" | "Vacuum" => Ok(Source::Vacuum),
            other => Err(ModelError::UnknownSource(other.to_string())),
        }
    }
}

/// Protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Four intensities (per-basis decoy/signal pairs), biased basis choice,
    /// no vacuum source; handles unbalanced detector efficiencies natively.
    FourIntensity,
    /// Three intensities (shared decoy/signal pair plus vacuum) run on the
    /// unbalanced receiver as-is.
    ThreeIntensityAsym,
    /// Three intensities with the receiver's basis efficiencies balanced
    /// down to the smaller one by attenuation.
    ThreeIntensitySym,
}

impl Variant {
    /// Whether the variant interleaves a vacuum source.
    pub fn uses_vacuum_source(self) -> bool {
        !matches!(self, Variant::FourIntensity)
    }

    /// Whether the receiver attenuates the better detector so both bases
    /// see the same efficiency.
    pub fn balances_detectors(self) -> bool {
        matches!(self, Variant::ThreeIntensitySym)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::FourIntensity => "4int",
            Variant::ThreeIntensityAsym => "3int-asym",
            Variant::ThreeIntensitySym => "3int-sym",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "4int" => Ok(Variant::FourIntensity),
            "3int-asym" => Ok(Variant::ThreeIntensityAsym),
            "3int-sym" => Ok(Variant::ThreeIntensitySym),
            other => Err(ModelError::UnknownVariant(other.to_string())),
        }
    }
}

/// Which argument feeds the relative-deviation formula when widening an
/// observed count into a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChernoffArg {
    /// The squared count divided by the number of sent pulses. Kept as the
    /// default for continuity with the published formula layout; on
    /// realistic data the resulting deviations exceed 1 for low-yield cells
    /// and the key rate collapses to zero.
    #[default]
    PaperLiteral,
    /// The observed count itself — the reading that reproduces the measured
    /// key rates. Recommended for any real evaluation.
    Counts,
}

impl std::str::FromStr for ChernoffArg {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "paper-literal" => Ok(ChernoffArg::PaperLiteral),
            "counts" => Ok(ChernoffArg::Counts),
            other => Err(ModelError::UnknownPolicy {
                switch: "chernoff-arg",
                value: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for ChernoffArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChernoffArg::PaperLiteral => "paper-literal",
            ChernoffArg::Counts => "counts",
        })
    }
}

/// Logarithm base used inside the phase-error statistical-correction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaLogBase {
    /// Natural logarithm (default; the sensitivity across bases is ~0.1%).
    #[default]
    E,
    /// Base-2 logarithm.
    Two,
    /// Base-10 logarithm.
    Ten,
}

impl std::str::FromStr for ThetaLogBase {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "e" => Ok(ThetaLogBase::E),
            "2" => Ok(ThetaLogBase::Two),
            "10" => Ok(ThetaLogBase::Ten),
            other => Err(ModelError::UnknownPolicy {
                switch: "theta-log-base",
                value: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for ThetaLogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThetaLogBase::E => "e",
            ThetaLogBase::Two => "2",
            ThetaLogBase::Ten => "10",
        })
    }
}

/// How the worst case over the vacuum-yield rectangle is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MinPolicy {
    /// Single evaluation at the corner (s0_Z upper, s0_X lower) — the
    /// directional worst case of the dominant key-basis term: the upper
    /// vacuum yield minimizes the key basis's single-photon lower bound,
    /// and the lower conjugate vacuum yield maximizes its phase-error upper
    /// bound. Reproduces the measured-run reference rates.
    #[default]
    Corner,
    /// Joint minimization over the full rectangle: dense 33×33 grid
    /// followed by per-axis golden-section refinement from the best cell.
    /// Strictly conservative (never above `Corner`); validated against a
    /// 513×513 dense-grid oracle.
    Grid,
}

impl std::str::FromStr for MinPolicy {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "corner" => Ok(MinPolicy::Corner),
            "grid" => Ok(MinPolicy::Grid),
            other => Err(ModelError::UnknownPolicy {
                switch: "min-policy",
                value: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for MinPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MinPolicy::Corner => "corner",
            MinPolicy::Grid => "grid",
        })
    }
}

/// Bundle of the three evaluation-policy switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnginePolicy {
    /// Confidence-interval argument convention.
    pub chernoff_arg: ChernoffArg,
    /// Logarithm base in the phase-error correction.
    pub theta_log_base: ThetaLogBase,
    /// Worst-case strategy over the vacuum-yield rectangle.
    pub min_policy: MinPolicy,
}

impl EnginePolicy {
    /// The setting that reproduces the measured-run reference rates:
    /// count-argument intervals, natural-log correction, corner worst case.
    pub fn measurement_matched() -> Self {
        EnginePolicy {
            chernoff_arg: ChernoffArg::Counts,
            theta_log_base: ThetaLogBase::E,
            min_policy: MinPolicy::Corner,
        }
    }
}

/// Deployed protocol parameters: intensities, source probabilities, the
/// receiver's basis bias, and the channel length they were chosen for.
///
/// Construct through [`ProtocolConfig::four_intensity`] or
/// [`ProtocolConfig::three_intensity`]; both validate every invariant and
/// renormalize small rounding excesses in the probability column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Protocol variant.
    pub variant: Variant,
    /// Fiber length in km.
    pub distance_km: f64,
    /// Z-basis decoy intensity (mean photon number).
    pub mu_z1: f64,
    /// Z-basis signal intensity.
    pub mu_z2: f64,
    /// X-basis decoy intensity.
    pub mu_x1: f64,
    /// X-basis signal intensity.
    pub mu_x2: f64,
    /// Probability of emitting a Z-basis decoy pulse.
    pub p_z1: f64,
    /// Probability of emitting a Z-basis signal pulse.
    pub p_z2: f64,
    /// Probability of emitting an X-basis decoy pulse.
    pub p_x1: f64,
    /// Probability of emitting an X-basis signal pulse.
    pub p_x2: f64,
    /// Probability of emitting a vacuum pulse (0 for the 4-intensity
    /// variant).
    pub p_vac: f64,
    /// Receiver's probability of measuring in X.
    pub q_x: f64,
}

impl ProtocolConfig {
    /// Build a 4-intensity configuration. `mus` and `ps` are ordered
    /// `[Z1, Z2, X1, X2]`; `ps` must sum to 1 within
    /// [`PROBABILITY_SUM_TOLERANCE`] and is renormalized to exactly 1.
    pub fn four_intensity(
        distance_km: f64,
        mus: [f64; 4],
        ps: [f64; 4],
        q_x: f64,
    ) -> Result<Self, ModelError> {
        let cfg = ProtocolConfig {
            variant: Variant::FourIntensity,
            distance_km,
            mu_z1: mus[0],
            mu_z2: mus[1],
            mu_x1: mus[2],
            mu_x2: mus[3],
            p_z1: ps[0],
            p_z2: ps[1],
            p_x1: ps[2],
            p_x2: ps[3],
            p_vac: 0.0,
            q_x,
        };
        cfg.normalized()
    }

    /// Build a 3-intensity configuration. `mu_decoy < mu_signal` are shared
    /// by both bases; `p_decoy`/`p_signal` are per-basis source
    /// probabilities, so the pulse budget is
    /// `2·(p_decoy + p_signal) + p_vacuum = 1` (within tolerance, then
    /// renormalized).
    pub fn three_intensity(
        variant: Variant,
        distance_km: f64,
        mu_decoy: f64,
        mu_signal: f64,
        p_decoy: f64,
        p_signal: f64,
        p_vacuum: f64,
        q_x: f64,
    ) -> Result<Self, ModelError> {
        if !variant.uses_vacuum_source() {
            return Err(ModelError::VariantShape {
                rule: "three_intensity constructor requires a 3-intensity variant",
            });
        }
        let cfg = ProtocolConfig {
            variant,
            distance_km,
            mu_z1: mu_decoy,
            mu_z2: mu_signal,
            mu_x1: mu_decoy,
            mu_x2: mu_signal,
            p_z1: p_decoy,
            p_z2: p_signal,
            p_x1: p_decoy,
            p_x2: p_signal,
            p_vac: p_vacuum,
            q_x,
        };
        cfg.normalized()
    }

    /// Validate all invariants, then return a copy with the probability
    /// column scaled to sum to exactly 1.
    fn normalized(mut self) -> Result<Self, ModelError> {
        self.validate_pre_normalization()?;
        let sum = self.probability_sum();
        self.p_z1 /= sum;
        self.p_z2 /= sum;
        self.p_x1 /= sum;
        self.p_x2 /= sum;
        self.p_vac /= sum;
        Ok(self)
    }

    /// Total emission probability across all sources (counting each basis's
    /// sources separately).
    fn probability_sum(&self) -> f64 {
        self.p_z1 + self.p_z2 + self.p_x1 + self.p_x2 + self.p_vac
    }

    fn validate_pre_normalization(&self) -> Result<(), ModelError> {
        let finite = [
            self.distance_km,
            self.mu_z1,
            self.mu_z2,
            self.mu_x1,
            self.mu_x2,
            self.p_z1,
            self.p_z2,
            self.p_x1,
            self.p_x2,
            self.p_vac,
            self.q_x,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        if self.distance_km < 0.0 {
            return Err(ModelError::NegativeDistance(self.distance_km));
        }
        for (basis, lo, hi) in [
            (Basis::Z, self.mu_z1, self.mu_z2),
            (Basis::X, self.mu_x1, self.mu_x2),
        ] {
            if !(lo > 0.0 && lo < hi && hi < 10.0) {
                return Err(ModelError::IntensityOrder {
                    basis,
                    decoy: lo,
                    signal: hi,
                });
            }
        }
        for p in [self.p_z1, self.p_z2, self.p_x1, self.p_x2] {
            if !(p > 0.0 && p < 1.0) {
                return Err(ModelError::ProbabilityRange(p));
            }
        }
        match self.variant.uses_vacuum_source() {
            true if !(self.p_vac > 0.0 && self.p_vac < 1.0) => {
                return Err(ModelError::VariantShape {
                    rule: "3-intensity variants require a vacuum-source probability in (0, 1)",
                });
            }
            false if self.p_vac != 0.0 => {
                return Err(ModelError::VariantShape {
                    rule: "the 4-intensity variant has no vacuum source (p_vac must be 0)",
                });
            }
            _ => {}
        }
        if self.variant.uses_vacuum_source()
            && (self.mu_z1 != self.mu_x1
                || self.mu_z2 != self.mu_x2
                || self.p_z1 != self.p_x1
                || self.p_z2 != self.p_x2)
        {
            return Err(ModelError::VariantShape {
                rule: "3-intensity variants tie intensities and probabilities across bases",
            });
        }
        let sum = self.probability_sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(ModelError::ProbabilitySum(sum));
        }
        if !(self.q_x > 0.0 && self.q_x < 1.0) {
            return Err(ModelError::BasisBias(self.q_x));
        }
        Ok(())
    }

    /// Mean photon number of a source (0 for the vacuum source).
    pub fn mu(&self, source: Source) -> f64 {
        match source {
            Source::Z1 => self.mu_z1,
            Source::Z2 => self.mu_z2,
            Source::X1 => self.mu_x1,
            Source::X2 => self.mu_x2,
            Source::Vacuum => 0.0,
        }
    }

    /// Emission probability of a source.
    pub fn p(&self, source: Source) -> f64 {
        match source {
            Source::Z1 => self.p_z1,
            Source::Z2 => self.p_z2,
            Source::X1 => self.p_x1,
            Source::X2 => self.p_x2,
            Source::Vacuum => self.p_vac,
        }
    }

    /// Receiver's probability of measuring in the given basis.
    pub fn q(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => 1.0 - self.q_x,
            Basis::X => self.q_x,
        }
    }

    /// Sources emitted by this variant.
    pub fn sources(&self) -> Vec<Source> {
        let mut s = Source::PULSED.to_vec();
        if self.variant.uses_vacuum_source() {
            s.push(Source::Vacuum);
        }
        s
    }
}

/// Receiver and channel constants of the measured system.
///
/// `Default` carries the reference hardware: dark counts per gate 2.5e-7,
/// after-pulse probability 1%, dead time 0.5 µs, misalignment 1.5%, fiber
/// loss 0.2 dB/km, receiver insertion loss 2.6 dB, error-correction
/// inefficiency 1.14, failure parameter 1e-10, 1e10 pulses per session at a
/// 625 MHz clock, detector efficiencies 10%/5% (Z/X).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    /// Dark-count probability per detector per gate.
    pub dark_rate: f64,
    /// After-pulse probability (fraction of clicks echoed).
    pub afterpulse: f64,
    /// Detector dead time in seconds.
    pub dead_time_s: f64,
    /// Polarization misalignment error probability.
    pub misalignment: f64,
    /// Fiber loss coefficient in dB/km.
    pub loss_coeff_db_per_km: f64,
    /// Receiver insertion loss in dB.
    pub extra_bob_loss_db: f64,
    /// Error-correction inefficiency factor f ≥ 1.
    pub error_correction_f: f64,
    /// Failure parameter ε for every statistical bound.
    pub epsilon: f64,
    /// Number of pulses sent per session (N_t).
    pub pulses: f64,
    /// System clock rate in Hz (converts per-pulse rate to bits/s).
    pub clock_hz: f64,
    /// Z-basis detector efficiency.
    pub eta_z: f64,
    /// X-basis detector efficiency.
    pub eta_x: f64,
}

impl Default for SystemModel {
    fn default() -> Self {
        SystemModel {
            dark_rate: 2.5e-7,
            afterpulse: 0.01,
            dead_time_s: 5.0e-7,
            misalignment: 0.015,
            loss_coeff_db_per_km: 0.2,
            extra_bob_loss_db: 2.6,
            error_correction_f: 1.14,
            epsilon: 1e-10,
            pulses: 1e10,
            clock_hz: 6.25e8,
            eta_z: 0.10,
            eta_x: 0.05,
        }
    }
}

impl SystemModel {
    /// Check every field against its admissible range.
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks: [(&str, f64, bool); 12] = [
            ("dark_rate", self.dark_rate, (0.0..0.5).contains(&self.dark_rate)),
            ("afterpulse", self.afterpulse, (0.0..1.0).contains(&self.afterpulse)),
            ("dead_time_s", self.dead_time_s, self.dead_time_s >= 0.0),
            (
                "misalignment",
                self.misalignment,
                (0.0..=0.5).contains(&self.misalignment),
            ),
            (
                "loss_coeff_db_per_km",
                self.loss_coeff_db_per_km,
                self.loss_coeff_db_per_km >= 0.0,
            ),
            (
                "extra_bob_loss_db",
                self.extra_bob_loss_db,
                self.extra_bob_loss_db >= 0.0,
            ),
            (
                "error_correction_f",
                self.error_correction_f,
                self.error_correction_f >= 1.0,
            ),
            (
                "epsilon",
                self.epsilon,
                self.epsilon > 0.0 && self.epsilon < 1.0,
            ),
            ("pulses", self.pulses, self.pulses >= 1.0),
            ("clock_hz", self.clock_hz, self.clock_hz > 0.0),
            ("eta_z", self.eta_z, self.eta_z > 0.0 && self.eta_z <= 1.0),
            ("eta_x", self.eta_x, self.eta_x > 0.0 && self.eta_x <= 1.0),
        ];
        for (field, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(ModelError::SystemField { field, value });
            }
        }
        Ok(())
    }

    /// Detector efficiency of the given measurement basis.
    pub fn eta(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => self.eta_z,
            Basis::X => self.eta_x,
        }
    }
}

/// Binary entropy in bits; 0 outside (0, 1).
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Poisson weight a_k = e^{−μ} μ^k / k! of finding k photons in a
/// weak-coherent pulse of intensity μ. Computed by forward recursion, which
/// is exact to f64 rounding for the k in scope.
pub fn poisson_weight(mu: f64, k: usize) -> f64 {
    let mut a = (-mu).exp();
    for i in 1..=k {
        a *= mu / i as f64;
    }
    a
}

/// Poisson weights a_0..a_k_max inclusive.
pub fn poisson_weights(mu: f64, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut a = (-mu).exp();
    out.push(a);
    for i in 1..=k_max {
        a *= mu / i as f64;
        out.push(a);
    }
    out
}

/// Violations of the model invariants. Every message names the rule so
/// configuration errors surface precisely.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Basis string not recognized.
    #[error("unknown basis {0:?} (expected Z or X)")]
    UnknownBasis(String),
    /// Source string not recognized.
    #[error("unknown source {0:?} (expected Z1, Z2, X1, X2 or VAC)")]
    UnknownSource(String),
    /// Variant string not recognized.
    #[error("unknown protocol variant {0:?} (expected 4int, 3int-asym or 3int-sym)")]
    UnknownVariant(String),
    /// Policy-switch string not recognized.
    #[error("unknown {switch} value {value:?}")]
    UnknownPolicy {
        /// Which switch was being parsed.
        switch: &'static str,
        /// The rejected value.
        value: String,
    },
    /// A numeric field is NaN or infinite.
    #[error("configuration contains a non-finite number")]
    NonFinite,
    /// Negative channel length.
    #[error("distance must be non-negative (got {0})")]
    NegativeDistance(f64),
    /// Per-basis intensities must satisfy 0 < decoy < signal.
    #[error("{basis}-basis intensities must satisfy 0 < decoy < signal < 10 (got decoy {decoy}, signal {signal})")]
    IntensityOrder {
        /// Basis whose pair is out of order.
        basis: Basis,
        /// Decoy intensity.
        decoy: f64,
        /// Signal intensity.
        signal: f64,
    },
    /// A source probability is outside (0, 1).
    #[error("source probabilities must lie in (0, 1) (got {0})")]
    ProbabilityRange(f64),
    /// The probability column does not sum to 1 within tolerance.
    #[error("source probabilities must sum to 1 within {PROBABILITY_SUM_TOLERANCE} (got {0})")]
    ProbabilitySum(f64),
    /// Receiver basis bias outside (0, 1).
    #[error("receiver basis bias q_x must lie in (0, 1) (got {0})")]
    BasisBias(f64),
    /// A variant-specific structural rule was violated.
    #[error("{rule}")]
    VariantShape {
        /// The violated rule.
        rule: &'static str,
    },
    /// A system constant is outside its admissible range.
    #[error("system field {field} out of range (got {value})")]
    SystemField {
        /// Field name.
        field: &'static str,
        /// Rejected value.
        value: f64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_4int() -> ProtocolConfig {
        // 87 km, efficiencies 10%/5%: the flagship 4-intensity column.
        ProtocolConfig::four_intensity(
            87.0,
            [0.020, 0.516, 0.170, 0.473],
            [0.094, 0.772, 0.116, 0.019],
            0.13,
        )
        .unwrap()
    }

    #[test]
    fn poisson_weights_match_high_precision_references() {
        // Frozen against a 40-digit evaluation of e^{−μ} μ^k / k!.
        assert_relative_eq!(
            poisson_weight(0.473, 0),
            0.62313007117765787635,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            poisson_weight(0.473, 2),
            0.069706133847253109509,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            poisson_weight(0.516, 1),
            0.30800215061996873765,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            poisson_weight(0.714, 3),
            0.029706885674394860762,
            max_relative = 1e-15
        );
    }

    #[test]
    fn poisson_weights_vector_matches_scalar() {
        let w = poisson_weights(0.473, PHOTON_CUTOFF);
        assert_eq!(w.len(), PHOTON_CUTOFF + 1);
        for (k, &wk) in w.iter().enumerate() {
            assert_relative_eq!(wk, poisson_weight(0.473, k), max_relative = 1e-15);
        }
        // The cutoff captures the full distribution to f64 precision.
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn binary_entropy_matches_high_precision_references() {
        assert_relative_eq!(
            binary_entropy(0.11),
            0.49991595816452799564,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            binary_entropy(0.03),
            0.19439185783157616087,
            max_relative = 1e-15
        );
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
    }

    #[test]
    fn four_intensity_column_is_renormalized() {
        let cfg = reference_4int();
        // The published column sums to 1.001; after renormalization the
        // probabilities sum to exactly 1 and keep their ratios.
        let sum = cfg.p_z1 + cfg.p_z2 + cfg.p_x1 + cfg.p_x2 + cfg.p_vac;
        assert_relative_eq!(sum, 1.0, max_relative = 1e-15);
        assert_relative_eq!(cfg.p_z2 / cfg.p_z1, 0.772 / 0.094, max_relative = 1e-12);
        assert_eq!(cfg.p_vac, 0.0);
    }

    #[test]
    fn three_intensity_budget_counts_both_bases() {
        let cfg = ProtocolConfig::three_intensity(
            Variant::ThreeIntensityAsym,
            87.0,
            0.125,
            0.521,
            0.062,
            0.428,
            0.020,
            0.5,
        )
        .unwrap();
        // 2·(0.062 + 0.428) + 0.020 = 1.000
        let sum = cfg.p_z1 + cfg.p_z2 + cfg.p_x1 + cfg.p_x2 + cfg.p_vac;
        assert_relative_eq!(sum, 1.0, max_relative = 1e-15);
        assert_eq!(cfg.mu(Source::Z1), cfg.mu(Source::X1));
        assert_eq!(cfg.p(Source::Z2), cfg.p(Source::X2));
        assert_eq!(cfg.mu(Source::Vacuum), 0.0);
    }

    #[test]
    fn probability_sum_outside_tolerance_is_rejected() {
        let err = ProtocolConfig::four_intensity(
            87.0,
            [0.020, 0.516, 0.170, 0.473],
            [0.094, 0.700, 0.116, 0.019],
            0.13,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ProbabilitySum(_)), "{err}");
    }

    #[test]
    fn intensity_order_is_enforced_per_basis() {
        let err = ProtocolConfig::four_intensity(
            87.0,
            [0.516, 0.020, 0.170, 0.473],
            [0.094, 0.772, 0.116, 0.019],
            0.13,
        )
        .unwrap_err();
        assert!(
            matches!(err, ModelError::IntensityOrder { basis: Basis::Z, .. }),
            "{err}"
        );
    }

    #[test]
    fn vacuum_probability_required_for_three_intensity() {
        let err = ProtocolConfig::three_intensity(
            Variant::ThreeIntensitySym,
            87.0,
            0.127,
            0.524,
            0.069,
            0.421,
            0.0,
            0.5,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::VariantShape { .. }), "{err}");
    }

    #[test]
    fn basis_bias_splits_between_bases() {
        let cfg = reference_4int();
        assert_relative_eq!(cfg.q(Basis::Z) + cfg.q(Basis::X), 1.0);
        assert_eq!(cfg.q(Basis::X), 0.13);
    }

    #[test]
    fn default_system_model_is_valid() {
        SystemModel::default().validate().unwrap();
    }

    #[test]
    fn system_field_violation_names_the_field() {
        let sys = SystemModel {
            epsilon: 0.0,
            ..SystemModel::default()
        };
        let err = sys.validate().unwrap_err();
        assert!(
            matches!(err, ModelError::SystemField { field: "epsilon", .. }),
            "{err}"
        );
    }
}
