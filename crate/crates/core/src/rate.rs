//! Worst-case secret-key rate over the admissible vacuum-yield rectangle.
//!
//! Per basis α (with signal source α₂ measured in α), the signed
//! contribution at a candidate vacuum-yield pair is
//!
//! ```text
//!   𝓡_α = p_{α2} q_α · { a₁(α₂)·s₁^{α,L}·[1 − H(e₁^{ph,α,U})]
//!                        − f·S_{α2}^α·H(E_{α2}^α) },
//! ```
//!
//! and the per-pulse rate is R = 𝓡_Z + 𝓡_X, minimized over the rectangle
//! (contributions stay signed inside the minimum; only the final result is
//! floored at zero — a negative rate means abort).

use crate::decoy::{DecoyEstimator, EstimateError, VacuumRectangle};
use crate::model::{binary_entropy, Basis, MinPolicy, Source};

/// Grid resolution per axis for the joint minimization.
const GRID_POINTS: usize = 33;

/// Golden-section iterations per axis refinement (interval shrinks by
/// φ⁻¹ ≈ 0.618 per step; 60 steps ≈ 3e-13 of the starting bracket).
const GOLDEN_ITERS: usize = 60;

/// Why a report carries a zero rate without evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// The admissible vacuum-yield interval of a basis is empty
    /// (lower end above upper end): the observations are inconsistent at
    /// the configured confidence.
    EmptyVacuumInterval(Basis),
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReason::EmptyVacuumInterval(b) => {
                write!(f, "empty admissible vacuum-yield interval in basis {b}")
            }
        }
    }
}

/// Per-basis diagnostics at the worst-case point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisBreakdown {
    /// Mean single-photon yield lower bound at the worst-case point.
    pub s1_mean_lower: f64,
    /// Signal-source single-photon yield lower bound.
    pub s1_lower: f64,
    /// Phase-error upper bound entering privacy amplification.
    pub phase_error_upper: f64,
    /// Observed signal gain S.
    pub signal_gain: f64,
    /// Raw observed signal error ratio E.
    pub signal_error_rate: f64,
    /// Signed contribution 𝓡 of this basis to the rate.
    pub contribution: f64,
}

/// Result of a worst-case rate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    /// Per-pulse secret-key rate, floored at 0.
    pub rate: f64,
    /// Rate converted to bits per second at the system clock.
    pub bits_per_second: f64,
    /// Admissible vacuum-yield rectangle.
    pub rectangle: VacuumRectangle,
    /// (s₀^Z, s₀^X) at which the rate was evaluated.
    pub worst_point: (f64, f64),
    /// Z-basis diagnostics at the worst-case point.
    pub z: BasisBreakdown,
    /// X-basis diagnostics at the worst-case point.
    pub x: BasisBreakdown,
    /// Set when the rate is zero by infeasibility rather than evaluation.
    pub infeasible: Option<InfeasibleReason>,
}

impl DecoyEstimator {
    fn signal_source(basis: Basis) -> Source {
        match basis {
            Basis::Z => Source::Z2,
            Basis::X => Source::X2,
        }
    }

    /// Signed contribution of `basis` with its own vacuum yield `s0_own`
    /// and the conjugate basis's vacuum yield `s0_conj`.
    fn basis_rate(&self, basis: Basis, s0_own: f64, s0_conj: f64) -> f64 {
        let signal = Self::signal_source(basis);
        let s1_mean = self.s1_mean_lower(basis, s0_own);
        let s1_low = self.s1_lower(signal, basis, s1_mean);
        let phase = self.phase_error_upper(basis, s0_conj);
        let gain = self.total_yield(signal, basis).observed;
        let err = self.err_rate[basis.index()];
        let a1 = self.a[signal.index().unwrap()][1];
        self.p[signal.index().unwrap()]
            * self.q[basis.index()]
            * (a1 * s1_low * (1.0 - binary_entropy(phase))
                - self.f_ec * gain * binary_entropy(err))
    }

    /// Signed per-pulse rate functional at a candidate vacuum-yield pair.
    pub fn rate_at(&self, s0_z: f64, s0_x: f64) -> f64 {
        self.basis_rate(Basis::Z, s0_z, s0_x) + self.basis_rate(Basis::X, s0_x, s0_z)
    }

    fn breakdown(&self, basis: Basis, s0_own: f64, s0_conj: f64) -> BasisBreakdown {
        let signal = Self::signal_source(basis);
        let s1_mean = self.s1_mean_lower(basis, s0_own);
        BasisBreakdown {
            s1_mean_lower: s1_mean,
            s1_lower: self.s1_lower(signal, basis, s1_mean),
            phase_error_upper: self.phase_error_upper(basis, s0_conj),
            signal_gain: self.total_yield(signal, basis).observed,
            signal_error_rate: self.err_rate[basis.index()],
            contribution: self.basis_rate(basis, s0_own, s0_conj),
        }
    }

    fn report_at(&self, s0_z: f64, s0_x: f64) -> KeyRateReport {
        let rate = self.rate_at(s0_z, s0_x).max(0.0);
        KeyRateReport {
            rate,
            bits_per_second: rate * self.clock_hz,
            rectangle: self.vacuum_rectangle(),
            worst_point: (s0_z, s0_x),
            z: self.breakdown(Basis::Z, s0_z, s0_x),
            x: self.breakdown(Basis::X, s0_x, s0_z),
            infeasible: None,
        }
    }

    fn infeasible_report(&self, rect: VacuumRectangle) -> KeyRateReport {
        let basis = if rect.z.is_feasible() { Basis::X } else { Basis::Z };
        let point = (rect.z.lower, rect.x.lower);
        KeyRateReport {
            rate: 0.0,
            bits_per_second: 0.0,
            rectangle: rect,
            worst_point: point,
            z: self.breakdown(Basis::Z, point.0, point.1),
            x: self.breakdown(Basis::X, point.1, point.0),
            infeasible: Some(InfeasibleReason::EmptyVacuumInterval(basis)),
        }
    }

    /// Worst-case rate over the admissible rectangle, per the estimator's
    /// minimization policy:
    ///
    /// - `Corner`: single evaluation at (s₀^Z upper, s₀^X lower), the
    ///   directional worst case of the key-basis term.
    /// - `Grid`: joint minimization — dense 33×33 grid, then golden-section
    ///   refinement on each axis from the best cell. Deterministic; the
    ///   grid scan reduces in row-major order with strict improvement.
    pub fn worst_case_rate(&self) -> KeyRateReport {
        let rect = self.vacuum_rectangle();
        if !rect.is_feasible() {
            return self.infeasible_report(rect);
        }
        match self.policy().min_policy {
            MinPolicy::Corner => self.report_at(rect.z.upper, rect.x.lower),
            MinPolicy::Grid => {
                let (z, x) = self.grid_minimum(rect);
                self.report_at(z, x)
            }
        }
    }

    /// Dense-grid + per-axis golden-section minimizer.
    ///
    /// The functional is separable per axis: the Z term's yield factor and
    /// the X term's phase-error entropy depend only on s₀^Z, and vice
    /// versa. Each axis is evaluated once per grid point and the 33×33
    /// combination is a cheap fused loop.
    fn grid_minimum(&self, rect: VacuumRectangle) -> (f64, f64) {
        let zs = axis_points(rect.z.lower, rect.z.upper, GRID_POINTS);
        let xs = axis_points(rect.x.lower, rect.x.upper, GRID_POINTS);

        // Per-axis pieces: key factor k(s0_own) and conjugate entropy
        // h(s0_conj) for each basis, plus the constant correction costs.
        let kz: Vec<f64> = zs.iter().map(|&z| self.key_factor(Basis::Z, z)).collect();
        let hx: Vec<f64> = zs
            .iter()
            .map(|&z| binary_entropy(self.phase_error_upper(Basis::X, z)))
            .collect();
        let kx: Vec<f64> = xs.iter().map(|&x| self.key_factor(Basis::X, x)).collect();
        let hz: Vec<f64> = xs
            .iter()
            .map(|&x| binary_entropy(self.phase_error_upper(Basis::Z, x)))
            .collect();
        let cost = self.correction_cost(Basis::Z) + self.correction_cost(Basis::X);

        let mut best = f64::INFINITY;
        let mut arg = (0usize, 0usize);
        for (i, (&kzi, &hxi)) in kz.iter().zip(&hx).enumerate() {
            for (j, (&kxj, &hzj)) in kx.iter().zip(&hz).enumerate() {
                let v = kzi * (1.0 - hzj) + kxj * (1.0 - hxi) - cost;
                if v < best {
                    best = v;
                    arg = (i, j);
                }
            }
        }

        // Refine each axis inside the bracket of neighboring grid cells,
        // Z first, then X at the refined Z.
        let (i, j) = arg;
        let (z_lo, z_hi) = bracket(&zs, i);
        let x_at = xs[j];
        let (z_min, _) = golden_min(|z| self.rate_at(z, x_at), z_lo, z_hi);
        let (x_lo, x_hi) = bracket(&xs, j);
        let (x_min, refined) = golden_min(|x| self.rate_at(z_min, x), x_lo, x_hi);

        if refined <= best {
            (z_min, x_min)
        } else {
            (zs[i], xs[j])
        }
    }

    /// Yield factor p_{α2}·q_α·a₁(α₂)·s₁^{α,L}(s₀) of a basis.
    fn key_factor(&self, basis: Basis, s0_own: f64) -> f64 {
        let signal = Self::signal_source(basis);
        let s1_mean = self.s1_mean_lower(basis, s0_own);
        let s1_low = self.s1_lower(signal, basis, s1_mean);
        let a1 = self.a[signal.index().unwrap()][1];
        self.p[signal.index().unwrap()] * self.q[basis.index()] * a1 * s1_low
    }

    /// Constant error-correction cost p_{α2}·q_α·f·S·H(E) of a basis.
    fn correction_cost(&self, basis: Basis) -> f64 {
        let signal = Self::signal_source(basis);
        self.p[signal.index().unwrap()]
            * self.q[basis.index()]
            * self.f_ec
            * self.total_yield(signal, basis).observed
            * binary_entropy(self.err_rate[basis.index()])
    }
}

/// Evenly spaced axis points, inclusive of both ends; a degenerate axis
/// collapses to a single point.
fn axis_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Bracket around grid index `i`: the neighboring points (or the point
/// itself at the boundary).
fn bracket(points: &[f64], i: usize) -> (f64, f64) {
    let lo = points[i.saturating_sub(1)];
    let hi = points[(i + 1).min(points.len() - 1)];
    (lo, hi)
}

/// Golden-section minimization of `f` on [lo, hi]; deterministic with a
/// fixed iteration count. Returns (argmin, min).
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Worst-case rate for a 3-intensity run: identical machinery with the
/// vacuum-yield rectangle taken from the measured vacuum source. The
/// variant must interleave a vacuum source and the counts must include its
/// cells.
pub fn rate_3intensity(
    counts: &crate::counts::CountsTable,
    cfg: &crate::model::ProtocolConfig,
    sys: &crate::model::SystemModel,
    policy: crate::model::EnginePolicy,
) -> Result<KeyRateReport, EstimateError> {
    if !cfg.variant.uses_vacuum_source() {
        return Err(EstimateError::Model(
            crate::model::ModelError::VariantShape {
                rule: "rate_3intensity requires a 3-intensity variant",
            },
        ));
    }
    Ok(DecoyEstimator::new(cfg, sys, counts, policy)?.worst_case_rate())
}

/// Worst-case rate for any variant (rectangle source dispatched by the
/// configuration's variant).
pub fn key_rate(
    counts: &crate::counts::CountsTable,
    cfg: &crate::model::ProtocolConfig,
    sys: &crate::model::SystemModel,
    policy: crate::model::EnginePolicy,
) -> Result<KeyRateReport, EstimateError> {
    Ok(DecoyEstimator::new(cfg, sys, counts, policy)?.worst_case_rate())
}
