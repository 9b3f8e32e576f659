//! Randomized invariant checks for the statistical building blocks and the
//! worst-case rate search.

use decoyrate_core::{
    binary_entropy, key_rate, relative_deviation, theta_correction, yield_interval, Basis,
    CellCounts, ChernoffArg, CountsTable, EnginePolicy, MinPolicy, ProtocolConfig, Source,
    SystemModel, ThetaLogBase,
};
use proptest::prelude::*;

fn run_87_4int() -> (ProtocolConfig, SystemModel, CountsTable) {
    let cfg = ProtocolConfig::four_intensity(
        87.0,
        [0.020, 0.516, 0.170, 0.473],
        [0.094, 0.772, 0.116, 0.019],
        0.13,
    )
    .unwrap();
    let sys = SystemModel::default();
    let cells: [(Source, Basis, f64, Option<f64>); 8] = [
        (Source::Z2, Basis::Z, 3_340_950.6, Some(62_990.5)),
        (Source::Z1, Basis::Z, 18_908.5, Some(1_999.8)),
        (Source::X2, Basis::X, 5_709.1, Some(143.9)),
        (Source::X1, Basis::X, 13_826.9, Some(600.8)),
        (Source::Z2, Basis::X, 264_307.1, None),
        (Source::Z1, Basis::X, 1_843.7, None),
        (Source::X2, Basis::Z, 74_118.7, None),
        (Source::X1, Basis::Z, 168_526.6, None),
    ];
    let mut counts = CountsTable::new();
    for (s, b, total, errors) in cells {
        counts.insert(s, b, CellCounts { total, errors }).unwrap();
    }
    (cfg, sys, counts)
}

/// ε sampled log-uniformly over [1e-12, 1e-2].
fn epsilons() -> impl Strategy<Value = f64> {
    (-12.0..-2.0f64).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn interval_brackets_the_observation(
        counts in 0.0..1.0e7f64,
        denom in 1.0e3..1.0e12f64,
        eps in epsilons(),
    ) {
        let iv = yield_interval(counts, denom, eps, ChernoffArg::Counts);
        prop_assert!(iv.lower >= 0.0);
        prop_assert!(iv.lower <= iv.observed);
        prop_assert!(iv.observed <= iv.upper);
    }

    #[test]
    fn interval_widens_as_confidence_tightens(
        counts in 1.0..1.0e7f64,
        denom in 1.0e3..1.0e12f64,
    ) {
        let wide = yield_interval(counts, denom, 1.0e-4, ChernoffArg::Counts);
        let tight = yield_interval(counts, denom, 1.0e-10, ChernoffArg::Counts);
        prop_assert!(tight.lower <= wide.lower);
        if wide.is_bounded() && tight.is_bounded() {
            prop_assert!(tight.upper >= wide.upper);
        }
    }

    #[test]
    fn relative_deviation_shrinks_with_evidence(
        x in 1.0..1.0e9f64,
        factor in 1.01..100.0f64,
        eps in epsilons(),
    ) {
        prop_assert!(relative_deviation(x * factor, eps) < relative_deviation(x, eps));
    }

    #[test]
    fn entropy_stays_in_the_unit_interval(e in 0.0..=1.0f64) {
        let h = binary_entropy(e);
        prop_assert!((0.0..=1.0).contains(&h));
        // Symmetry about 1/2.
        let h_sym = binary_entropy(1.0 - e);
        prop_assert!((h - h_sym).abs() < 1e-12);
    }

    #[test]
    fn theta_is_symmetric_in_the_two_populations(
        na in 1.0e3..1.0e10f64,
        nb in 1.0e3..1.0e10f64,
        e1 in 1.0e-6..0.4999f64,
        eps in epsilons(),
    ) {
        let ab = theta_correction(na, nb, e1, eps, ThetaLogBase::E);
        let ba = theta_correction(nb, na, e1, eps, ThetaLogBase::E);
        prop_assert!((ab - ba).abs() <= 1e-15 * ab.abs().max(1.0));
    }

    #[test]
    fn theta_is_nonnegative(
        na in 1.0e3..1.0e10f64,
        nb in 1.0e3..1.0e10f64,
        e1 in 0.0..=0.5f64,
        eps in epsilons(),
    ) {
        prop_assert!(theta_correction(na, nb, e1, eps, ThetaLogBase::E) >= 0.0);
    }

    #[test]
    fn grid_minimum_is_at_or_below_any_probe_point(
        tz in 0.0..=1.0f64,
        tx in 0.0..=1.0f64,
    ) {
        let (cfg, sys, counts) = run_87_4int();
        let policy = EnginePolicy {
            min_policy: MinPolicy::Grid,
            ..EnginePolicy::measurement_matched()
        };
        let report = key_rate(&counts, &cfg, &sys, policy).unwrap();
        let rect = report.rectangle;
        let z = rect.z.lower + tz * (rect.z.upper - rect.z.lower);
        let x = rect.x.lower + tx * (rect.x.upper - rect.x.lower);
        let est = decoyrate_core::DecoyEstimator::new(&cfg, &sys, &counts, policy).unwrap();
        let probe = est.rate_at(z, x).max(0.0);
        prop_assert!(
            report.rate <= probe + 1e-15,
            "grid minimum {} exceeds probe {} at ({z}, {x})",
            report.rate,
            probe
        );
    }

    #[test]
    fn bound_chain_respects_its_clamps(s0_frac in 0.0..=1.0f64) {
        let (cfg, sys, counts) = run_87_4int();
        let est = decoyrate_core::DecoyEstimator::new(
            &cfg, &sys, &counts, EnginePolicy::measurement_matched(),
        ).unwrap();
        let rect = est.vacuum_rectangle();
        for basis in Basis::ALL {
            let axis = rect.axis(basis);
            let s0 = axis.lower + s0_frac * (axis.upper - axis.lower);
            let s1m = est.s1_mean_lower(basis, s0);
            prop_assert!(s1m >= 0.0);
            let signal = match basis { Basis::Z => Source::Z2, Basis::X => Source::X2 };
            let s1l = est.s1_lower(signal, basis, s1m);
            prop_assert!(s1l >= 0.0);
            prop_assert!(s1l <= s1m);
            let e1 = est.e1_upper(basis, s0);
            prop_assert!((0.0..=0.5).contains(&e1));
            let ph = est.phase_error_upper(basis, s0);
            prop_assert!((0.0..=0.5).contains(&ph));
            prop_assert!(ph >= est.e1_upper(basis.conjugate(), s0));
        }
    }
}

#[test]
fn rate_is_monotone_in_the_security_parameter() {
    let (cfg, sys, counts) = run_87_4int();
    let mut last = f64::INFINITY;
    for eps in [1.0e-6, 1.0e-8, 1.0e-10] {
        let sys_eps = SystemModel { epsilon: eps, ..sys };
        let report =
            key_rate(&counts, &cfg, &sys_eps, EnginePolicy::measurement_matched()).unwrap();
        assert!(
            report.rate <= last,
            "rate should not grow as ε shrinks: {} after {last} at ε={eps}",
            report.rate
        );
        assert!(report.rate > 0.0);
        last = report.rate;
    }
}

#[test]
fn worst_case_report_never_goes_negative() {
    let (cfg, sys, counts) = run_87_4int();
    for policy in [
        EnginePolicy::measurement_matched(),
        EnginePolicy {
            min_policy: MinPolicy::Grid,
            ..EnginePolicy::measurement_matched()
        },
        EnginePolicy::default(),
    ] {
        let report = key_rate(&counts, &cfg, &sys, policy).unwrap();
        assert!(report.rate >= 0.0);
        assert!(report.bits_per_second >= 0.0);
    }
}
