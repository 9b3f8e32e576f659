//! Multiplicative-Chernoff confidence intervals for observed counts.
//!
//! An observed count X with expectation x satisfies, except with
//! probability ε (split evenly between the two tails),
//!
//! ```text
//!   X / (1 + δ)  ≤  x  ≤  X / (1 − δ),    δ = (L + √(L² + 8·L·x)) / (2x),
//! ```
//!
//! with L = −ln(ε/2). The same relative deviation δ widens an observed
//! yield S = counts/denominator into the interval [S/(1+δ), S/(1−δ)];
//! when δ ≥ 1 the upper end is unbounded.

use crate::model::ChernoffArg;

/// L = −ln(ε/2), the log tail weight entering every deviation bound.
pub fn chernoff_log_term(epsilon: f64) -> f64 {
    -(epsilon / 2.0).ln()
}

/// Relative deviation δ(x, ε) = (L + √(L² + 8·L·x)) / (2x).
///
/// Guard: non-positive x has no meaningful relative deviation and returns
/// +∞ (the caller's interval degenerates to the zero-count convention).
pub fn relative_deviation(x: f64, epsilon: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let l = chernoff_log_term(epsilon);
    (l + (l * l + 8.0 * l * x).sqrt()) / (2.0 * x)
}

/// Two-sided confidence interval around an observed yield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldInterval {
    /// Observed yield S = counts / denominator.
    pub observed: f64,
    /// Lower confidence end S/(1+δ).
    pub lower: f64,
    /// Upper confidence end S/(1−δ); +∞ when δ ≥ 1.
    pub upper: f64,
}

impl YieldInterval {
    /// Whether the upper end is finite.
    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }
}

/// Interval for a yield observed as `counts` detections out of `denom`
/// sent pulses (fractional counts are accepted: run averages are means of
/// integer counts and every formula is continuous in them).
///
/// `arg` selects what feeds the deviation formula: the count itself
/// (`Counts`) or count²/denominator (`PaperLiteral`).
///
/// Zero observed counts carry no relative-deviation information; the
/// interval is then `[0, L/denom]`, the largest yield whose expected count
/// would still show zero detections with probability ≥ ε/2.
pub fn yield_interval(counts: f64, denom: f64, epsilon: f64, arg: ChernoffArg) -> YieldInterval {
    debug_assert!(denom > 0.0, "yield denominator must be positive");
    let observed = counts / denom;
    if counts <= 0.0 {
        return YieldInterval {
            observed: 0.0,
            lower: 0.0,
            upper: chernoff_log_term(epsilon) / denom,
        };
    }
    let x = match arg {
        ChernoffArg::Counts => counts,
        ChernoffArg::PaperLiteral => counts * counts / denom,
    };
    let delta = relative_deviation(x, epsilon);
    YieldInterval {
        observed,
        lower: observed / (1.0 + delta),
        upper: if delta < 1.0 {
            observed / (1.0 - delta)
        } else {
            f64::INFINITY
        },
    }
}
