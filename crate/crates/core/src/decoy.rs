//! Single-photon yield and phase-error bounds from observed decoy
//! statistics, with every estimate widened by its finite-sample deviation.
//!
//! The chain, per measured basis ω:
//!
//! 1. Decoy linear algebra on the confidence-widened yields of both
//!    preparation bases bounds the mean single-photon yield ⟨s₁^ω⟩ from
//!    below as a function of the vacuum yield s₀^ω.
//! 2. A second deviation on the single-photon pulse population converts
//!    the mean bound into a per-source lower bound s₁^{ω,L}.
//! 3. The matched-basis error-yield upper bound, reduced by the vacuum
//!    contribution, bounds the single-photon error rate e₁^{ω,U}.
//! 4. A random-sampling correction θ transfers the monitoring-basis error
//!    rate onto the key basis's single photons (the phase-error rate).
//! 5. The admissible (s₀^Z, s₀^X) values form a rectangle: for the
//!    4-intensity variant from decoy algebra and error-yield caps, for the
//!    3-intensity variants from the measured vacuum source directly.

use thiserror::Error;

use crate::counts::{CountsError, CountsTable};
use crate::model::{
    poisson_weight, Basis, EnginePolicy, ModelError, ProtocolConfig, Source, SystemModel,
    ThetaLogBase, Variant,
};
use crate::stats::{relative_deviation, yield_interval, YieldInterval};

/// Floor applied to an error rate before it enters logarithms inside the
/// statistical correction (keeps the correction finite at zero observed
/// errors).
const ERROR_RATE_FLOOR: f64 = 1e-12;

/// One axis of the admissible vacuum-yield region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisInterval {
    /// Smallest admissible vacuum yield.
    pub lower: f64,
    /// Largest admissible vacuum yield.
    pub upper: f64,
}

impl AxisInterval {
    /// Whether the interval is non-empty.
    pub fn is_feasible(&self) -> bool {
        self.lower <= self.upper
    }

    /// Interval width (0 for degenerate intervals).
    pub fn width(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }
}

/// Admissible (s₀^Z, s₀^X) rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumRectangle {
    /// Admissible Z-basis vacuum yields.
    pub z: AxisInterval,
    /// Admissible X-basis vacuum yields.
    pub x: AxisInterval,
}

impl VacuumRectangle {
    /// Whether both axes are non-empty.
    pub fn is_feasible(&self) -> bool {
        self.z.is_feasible() && self.x.is_feasible()
    }

    /// The axis for a basis.
    pub fn axis(&self, basis: Basis) -> AxisInterval {
        match basis {
            Basis::Z => self.z,
            Basis::X => self.x,
        }
    }
}

/// Random-sampling correction θ added when transferring an error rate
/// observed on one single-photon population (size `n_a`) onto another
/// (size `n_b`):
///
/// ```text
///   θ = √(n_θ / d_θ),
///   d_θ = g(1−g)·ln2 / (2·e₁(1−e₁)),        g = n_a/(n_a+n_b),
///   n_θ = −log( ε·√(e₁(1−e₁)·n_a·n_b/(n_a+n_b)) ) / (n_a+n_b).
/// ```
///
/// Symmetric in (`n_a`, `n_b`). The error rate is clamped to
/// [1e-12, 0.5] before entering the logarithms; a non-positive population
/// yields an infinite correction (the caller clamps the resulting rate to
/// 1/2).
pub fn theta_correction(
    n_a: f64,
    n_b: f64,
    e1: f64,
    epsilon: f64,
    base: ThetaLogBase,
) -> f64 {
    if n_a <= 0.0 || n_b <= 0.0 {
        return f64::INFINITY;
    }
    let e1 = e1.clamp(ERROR_RATE_FLOOR, 0.5);
    let n = n_a + n_b;
    let g = n_a / n;
    let d_theta = (1.0 - g) * g * std::f64::consts::LN_2 / (2.0 * (1.0 - e1) * e1);
    let inner = epsilon * (e1 * (1.0 - e1) * n_a * n_b / n).sqrt();
    let log_inner = match base {
        ThetaLogBase::E => inner.ln(),
        ThetaLogBase::Two => inner.log2(),
        ThetaLogBase::Ten => inner.log10(),
    };
    let n_theta = (-log_inner / n).max(0.0);
    (n_theta / d_theta).sqrt()
}

/// Finite-key estimator for one observed run: protocol + system +
/// validated counts, with all confidence intervals precomputed.
pub struct DecoyEstimator {
    pub(crate) variant: Variant,
    pub(crate) policy: EnginePolicy,
    pub(crate) epsilon: f64,
    pub(crate) pulses: f64,
    pub(crate) f_ec: f64,
    pub(crate) clock_hz: f64,
    /// Emission probability per pulsed source (canonical order).
    pub(crate) p: [f64; 4],
    /// Receiver basis probability (Z, X).
    pub(crate) q: [f64; 2],
    /// Poisson weights a_k, k = 0..2, per pulsed source.
    pub(crate) a: [[f64; 3]; 4],
    /// Confidence intervals of the total yields, per (source, basis).
    pub(crate) iv: [[YieldInterval; 2]; 4],
    /// Upper confidence end of the matched-basis error yield, per source.
    pub(crate) err_upper: [f64; 4],
    /// Raw observed signal error ratio E = errors/total, per basis.
    pub(crate) err_rate: [f64; 2],
    /// Vacuum-cell yield intervals (3-intensity variants only), per basis.
    pub(crate) vac_iv: Option<[YieldInterval; 2]>,
}

impl DecoyEstimator {
    /// Build the estimator, validating the system constants and the
    /// presence of every cell the variant consumes.
    pub fn new(
        cfg: &ProtocolConfig,
        sys: &SystemModel,
        counts: &CountsTable,
        policy: EnginePolicy,
    ) -> Result<Self, EstimateError> {
        sys.validate()?;
        counts.validate_for(cfg.variant)?;

        let mut p = [0.0; 4];
        let mut a = [[0.0; 3]; 4];
        let mut iv = [[YieldInterval {
            observed: 0.0,
            lower: 0.0,
            upper: 0.0,
        }; 2]; 4];
        let mut err_upper = [f64::INFINITY; 4];
        let mut err_rate = [0.0; 2];

        for source in Source::PULSED {
            let s = source.index().expect("pulsed source");
            p[s] = cfg.p(source);
            for k in 0..3 {
                a[s][k] = poisson_weight(cfg.mu(source), k);
            }
            for basis in Basis::ALL {
                let denom = cfg.p(source) * cfg.q(basis) * sys.pulses;
                let total = counts.total(source, basis)?;
                iv[s][basis.index()] =
                    yield_interval(total, denom, sys.epsilon, policy.chernoff_arg);
            }
            let matched = source.basis().expect("pulsed source");
            let denom = cfg.p(source) * cfg.q(matched) * sys.pulses;
            let errors = counts.errors(source, matched)?;
            err_upper[s] =
                yield_interval(errors, denom, sys.epsilon, policy.chernoff_arg).upper;
        }
        for (basis, signal) in [(Basis::Z, Source::Z2), (Basis::X, Source::X2)] {
            let total = counts.total(signal, basis)?;
            let errors = counts.errors(signal, basis)?;
            err_rate[basis.index()] = if total > 0.0 { errors / total } else { 0.0 };
        }

        let vac_iv = if cfg.variant.uses_vacuum_source() {
            let mut v = [YieldInterval {
                observed: 0.0,
                lower: 0.0,
                upper: 0.0,
            }; 2];
            for basis in Basis::ALL {
                let denom = cfg.p(Source::Vacuum) * cfg.q(basis) * sys.pulses;
                let total = counts.total(Source::Vacuum, basis)?;
                v[basis.index()] =
                    yield_interval(total, denom, sys.epsilon, policy.chernoff_arg);
            }
            Some(v)
        } else {
            None
        };

        Ok(DecoyEstimator {
            variant: cfg.variant,
            policy,
            epsilon: sys.epsilon,
            pulses: sys.pulses,
            f_ec: sys.error_correction_f,
            clock_hz: sys.clock_hz,
            p,
            q: [cfg.q(Basis::Z), cfg.q(Basis::X)],
            a,
            iv,
            err_upper,
            err_rate,
            vac_iv,
        })
    }

    /// The policy this estimator was built with.
    pub fn policy(&self) -> EnginePolicy {
        self.policy
    }

    /// The protocol variant this estimator was built for.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Number of pulses sent from `source` and measured in `basis`
    /// (the yield denominator p·q·N).
    pub fn sent(&self, source: Source, basis: Basis) -> f64 {
        let s = source.index().expect("pulsed source");
        self.p[s] * self.q[basis.index()] * self.pulses
    }

    /// Expected k-photon pulse population of a (source, basis) cell.
    pub fn sent_k_photons(&self, k: usize, source: Source, basis: Basis) -> f64 {
        let s = source.index().expect("pulsed source");
        self.a[s][k] * self.sent(source, basis)
    }

    /// Confidence interval of the total yield of a cell.
    pub fn total_yield(&self, source: Source, basis: Basis) -> YieldInterval {
        let s = source.index().expect("pulsed source");
        self.iv[s][basis.index()]
    }

    /// Upper confidence end of the matched-basis error yield of a source.
    pub fn error_yield_upper(&self, source: Source) -> f64 {
        self.err_upper[source.index().expect("pulsed source")]
    }

    fn a_of(&self, source: Source, k: usize) -> f64 {
        self.a[source.index().expect("pulsed source")][k]
    }

    fn basis_sources(basis: Basis) -> (Source, Source) {
        match basis {
            Basis::Z => (Source::Z1, Source::Z2),
            Basis::X => (Source::X1, Source::X2),
        }
    }

    /// Lower bound on the mean single-photon yield in `basis`, given a
    /// candidate vacuum yield s₀ for that basis. Both preparation bases'
    /// decoy/signal pairs give an estimate; the larger (tighter) one wins.
    /// Floored at 0.
    pub fn s1_mean_lower(&self, basis: Basis, s0: f64) -> f64 {
        let w = basis.index();
        let mut best = f64::NEG_INFINITY;
        for prep in Basis::ALL {
            let (d, s) = Self::basis_sources(prep);
            let a1 = |k: usize| self.a_of(d, k);
            let a2 = |k: usize| self.a_of(s, k);
            // Determinants of the 2×2 decoy system for photon numbers
            // (1,2) and (0,2); positive because μ_decoy < μ_signal.
            let a12 = a1(1) * a2(2) - a2(1) * a1(2);
            let a02 = a1(0) * a2(2) - a2(0) * a1(2);
            let lo1 = self.iv[d.index().unwrap()][w].lower;
            let up2 = self.iv[s.index().unwrap()][w].upper;
            let v = (a2(2) * lo1 - a1(2) * up2 - a02 * s0) / a12;
            best = best.max(v);
        }
        best.max(0.0)
    }

    /// Per-source single-photon yield lower bound: the mean bound shrunk
    /// by the relative deviation of the source's single-photon population.
    pub fn s1_lower(&self, source: Source, basis: Basis, s1_mean: f64) -> f64 {
        let population = self.sent_k_photons(1, source, basis) * s1_mean;
        if population <= 0.0 {
            return 0.0;
        }
        (s1_mean * (1.0 - relative_deviation(population, self.epsilon))).max(0.0)
    }

    /// Upper bound on the single-photon error rate observed in `basis`,
    /// given that basis's vacuum yield: the decoy source's error-yield
    /// upper end, reduced by the vacuum contribution, per detected single
    /// photon. Clamped to [0, 1/2]; an empty single-photon bound yields
    /// the trivial 1/2.
    pub fn e1_upper(&self, basis: Basis, s0: f64) -> f64 {
        let (decoy, _) = Self::basis_sources(basis);
        let s1_mean = self.s1_mean_lower(basis, s0);
        let s1_low = self.s1_lower(decoy, basis, s1_mean);
        if s1_low <= 0.0 {
            return 0.5;
        }
        let t_upper = self.error_yield_upper(decoy);
        let vacuum_population = self.sent_k_photons(0, decoy, basis) * s0;
        let vacuum_term = if s0 > 0.0 && vacuum_population > 0.0 {
            self.a_of(decoy, 0)
                * s0
                * (1.0 - relative_deviation(vacuum_population, self.epsilon))
                / 2.0
        } else {
            0.0
        };
        let e = (t_upper - vacuum_term) / (self.a_of(decoy, 1) * s1_low);
        e.clamp(0.0, 0.5)
    }

    /// Phase-error upper bound for the key basis, given the conjugate
    /// basis's vacuum yield: the conjugate basis's single-photon error
    /// bound plus the random-sampling correction between the two
    /// single-photon populations. Clamped to [0, 1/2].
    pub fn phase_error_upper(&self, key_basis: Basis, s0_conjugate: f64) -> f64 {
        let conj = key_basis.conjugate();
        let e1 = self.e1_upper(conj, s0_conjugate);
        let (conj_decoy, _) = Self::basis_sources(conj);
        let (_, key_signal) = Self::basis_sources(key_basis);
        let n_conj = self.sent_k_photons(1, conj_decoy, conj);
        let n_key = self.sent_k_photons(1, key_signal, key_basis);
        let theta = theta_correction(
            n_conj,
            n_key,
            e1,
            self.epsilon,
            self.policy.theta_log_base,
        );
        (e1 + theta).clamp(0.0, 0.5)
    }

    /// Admissible vacuum-yield rectangle.
    ///
    /// 4-intensity: per measured basis, the lower end comes from the
    /// (0,1)-photon decoy determinants of both preparation bases, the
    /// upper end from the error-yield cap 2·T̄/a₀ and the decoy-source
    /// yield caps, all capped at 1.
    ///
    /// 3-intensity: the measured vacuum cell's own confidence interval,
    /// capped at 1.
    pub fn vacuum_rectangle(&self) -> VacuumRectangle {
        let mut axes = [AxisInterval {
            lower: 0.0,
            upper: 0.0,
        }; 2];
        match self.vac_iv {
            Some(vac) => {
                for basis in Basis::ALL {
                    let iv = vac[basis.index()];
                    axes[basis.index()] = AxisInterval {
                        lower: iv.lower,
                        upper: iv.upper.min(1.0),
                    };
                }
            }
            None => {
                for basis in Basis::ALL {
                    let w = basis.index();
                    let mut lower = 0.0_f64;
                    for prep in Basis::ALL {
                        let (d, s) = Self::basis_sources(prep);
                        let a1 = |k: usize| self.a_of(d, k);
                        let a2 = |k: usize| self.a_of(s, k);
                        let a01 = a1(0) * a2(1) - a2(0) * a1(1);
                        let v = (a2(1) * self.iv[d.index().unwrap()][w].lower
                            - a1(1) * self.iv[s.index().unwrap()][w].upper)
                            / a01;
                        lower = lower.max(v);
                    }
                    let (decoy, _) = Self::basis_sources(basis);
                    let upper = (2.0 * self.error_yield_upper(decoy)
                        / self.a_of(decoy, 0))
                    .min(self.iv[Source::Z1.index().unwrap()][w].upper
                        / self.a_of(Source::Z1, 0))
                    .min(self.iv[Source::X1.index().unwrap()][w].upper
                        / self.a_of(Source::X1, 0))
                    .min(1.0);
                    axes[w] = AxisInterval { lower, upper };
                }
            }
        }
        VacuumRectangle {
            z: axes[0],
            x: axes[1],
        }
    }
}

/// Failures while building or applying the estimator.
#[derive(Debug, Error)]
pub enum EstimateError {
    /// Invalid protocol or system description.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Count table incomplete or inconsistent.
    #[error(transparent)]
    Counts(#[from] CountsError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theta_matches_high_precision_references() {
        // Frozen against a 40-digit evaluation.
        assert_relative_eq!(
            theta_correction(1e6, 1e6, 0.03, 1e-10, ThetaLogBase::E),
            0.0017498263134513489979,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            theta_correction(1e6, 1e6, 0.03, 1e-10, ThetaLogBase::Two),
            0.0021017555965705976444,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            theta_correction(1e6, 1e6, 0.03, 1e-10, ThetaLogBase::Ten),
            0.0011531534395067587846,
            max_relative = 1e-14
        );
        // Asymmetric populations of the flagship run's magnitude.
        assert_relative_eq!(
            theta_correction(2.163e7, 2.0656e9, 0.0262, 1e-10, ThetaLogBase::E),
            0.0002376376489209766379,
            max_relative = 1e-14
        );
    }

    #[test]
    fn theta_is_symmetric_in_the_two_populations() {
        let a = theta_correction(3.7e5, 9.1e8, 0.021, 1e-10, ThetaLogBase::E);
        let b = theta_correction(9.1e8, 3.7e5, 0.021, 1e-10, ThetaLogBase::E);
        assert_relative_eq!(a, b, max_relative = 1e-15);
    }

    #[test]
    fn theta_handles_degenerate_inputs() {
        assert!(theta_correction(0.0, 1e6, 0.03, 1e-10, ThetaLogBase::E).is_infinite());
        // A clamped error rate keeps the correction finite at e1 = 0.
        assert!(theta_correction(1e6, 1e6, 0.0, 1e-10, ThetaLogBase::E).is_finite());
    }
}
