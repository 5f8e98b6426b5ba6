use hyptimes_core::dynamics::{CirclePoint, DoublingBaselineMap, IntermittentCircleMap, MapSystem};
use hyptimes_core::hyptimes::{
    classify_results, detect_brute, detect_fast, first_hyperbolic_time, FirstTime, HyperbolicParams,
};
use hyptimes_core::orbits::{generate_orbit, EnsembleSpec, OrbitTrace};
use proptest::prelude::*;

const F: IntermittentCircleMap = IntermittentCircleMap;

fn synthetic(a: Vec<f64>, r: Vec<f64>) -> OrbitTrace {
    OrbitTrace::from_observables(a, r, 1.0).unwrap()
}

fn params(sigma: f64, b: f64) -> HyperbolicParams {
    HyperbolicParams::new(sigma, 1.0, b, 0.5).unwrap()
}

/// Observables from a small alphabet, so that ties are frequent.
fn coarse_trace(max_len: usize) -> impl Strategy<Value = OrbitTrace> {
    (1..=max_len).prop_flat_map(|n| {
        (
            proptest::collection::vec(prop::sample::select(vec![-1.0, -0.5, -0.1, 0.0, 0.1, 0.5]), n),
            proptest::collection::vec(prop::sample::select(vec![-3.0, -1.0, -0.25, 0.0]), n),
        )
            .prop_map(|(a, r)| synthetic(a, r))
    })
}

fn real_trace(max_len: usize) -> impl Strategy<Value = OrbitTrace> {
    (1..=max_len).prop_flat_map(|n| {
        (
            proptest::collection::vec(-2.0..1.0f64, n),
            proptest::collection::vec(prop_oneof![Just(0.0), -6.0..0.0f64], n),
        )
            .prop_map(|(a, r)| synthetic(a, r))
    })
}

fn any_params() -> impl Strategy<Value = HyperbolicParams> {
    (0.05..0.99f64, 0.01..0.49f64).prop_map(|(s, b)| params(s, b))
}

fn intermittent_point() -> impl Strategy<Value = CirclePoint> {
    (-0.999..0.999f64)
        .prop_filter("away from S", |x| x.abs() > 1e-3 && 1.0 - x.abs() > 1e-3)
        .prop_map(|x| CirclePoint::new(x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn fast_equals_brute_on_tie_heavy_traces(t in coarse_trace(40), p in any_params()) {
        prop_assert_eq!(detect_fast(&t, &p).unwrap(), detect_brute(&t, &p).unwrap());
    }

    #[test]
    fn fast_equals_brute_on_real_traces(t in real_trace(80), p in any_params(), tol in prop_oneof![Just(0.0), 0.0..0.1f64]) {
        let p = p.with_tolerance(tol).unwrap();
        prop_assert_eq!(detect_fast(&t, &p).unwrap(), detect_brute(&t, &p).unwrap());
    }

    #[test]
    fn times_are_increasing_and_frequencies_bounded(t in real_trace(80), p in any_params()) {
        let res = detect_fast(&t, &p).unwrap();
        prop_assert!(res.times().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(res.times().iter().all(|&n| n >= 1 && n <= t.len()));
        for n in 1..=t.len() {
            let f = res.frequency_at(n);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }

    /// Beyond a hyperbolic time n, the times of x are n plus the times of f^n x.
    #[test]
    fn concatenation_at_hyperbolic_times(t in coarse_trace(40), p in any_params()) {
        let res = detect_fast(&t, &p).unwrap();
        for &n in res.times() {
            let tail = detect_fast(&t.suffix(n), &p).unwrap();
            let shifted: Vec<usize> = tail.times().iter().map(|m| m + n).collect();
            let after: Vec<usize> = res.times().iter().copied().filter(|&m| m > n).collect();
            prop_assert_eq!(&shifted, &after);
            // gap law: the next time is n plus the first time of f^n x
            prop_assert_eq!(res.next_after(n), tail.first().value().map(|h| h + n));
        }
    }

    /// For any n, later hyperbolic times of x remain hyperbolic for f^n x.
    #[test]
    fn suffix_keeps_later_times(t in real_trace(60), p in any_params(), cut in 0usize..60) {
        let cut = cut.min(t.len() - 1);
        let res = detect_fast(&t, &p).unwrap();
        let tail = detect_fast(&t.suffix(cut), &p).unwrap();
        for &m in res.times().iter().filter(|&&m| m > cut) {
            prop_assert!(tail.contains(m - cut));
        }
    }

    /// Raising σ relaxes the derivative condition; with no recurrence
    /// constraint the time set can only grow.
    #[test]
    fn monotone_in_sigma_without_recurrence(a in proptest::collection::vec(-2.0..1.0f64, 1..80), s1 in 0.05..0.98f64, ds in 0.0..0.5f64) {
        let s2 = (s1 + ds).min(0.99);
        let t = synthetic(a.clone(), vec![0.0; a.len()]);
        let r1 = detect_fast(&t, &params(s1, 0.25)).unwrap();
        let r2 = detect_fast(&t, &params(s2, 0.25)).unwrap();
        prop_assert!(r1.times().iter().all(|&n| r2.contains(n)));
    }

    #[test]
    fn orbit_shift_consistency(x in intermittent_point(), cut in 0usize..50) {
        let p = HyperbolicParams::intermittent_default();
        let Ok(t) = generate_orbit(&F, x, 100, p.delta()) else { return Ok(()) };
        let shifted = generate_orbit(&F, t.points()[cut], 100 - cut, p.delta()).unwrap();
        prop_assert_eq!(t.suffix(cut), shifted);
    }

    #[test]
    fn mirror_symmetry(x in intermittent_point()) {
        let p = HyperbolicParams::intermittent_default();
        let mirror = CirclePoint::new(-x.coord()).unwrap();
        let (Ok(t), Ok(u)) = (generate_orbit(&F, x, 200, p.delta()), generate_orbit(&F, mirror, 200, p.delta())) else {
            return Ok(());
        };
        // f is odd away from the wrap point, so observables coincide
        prop_assert_eq!(t.inv_deriv(), u.inv_deriv());
        prop_assert_eq!(t.log_dist(), u.log_dist());
        prop_assert_eq!(detect_fast(&t, &p).unwrap(), detect_fast(&u, &p).unwrap());
    }

    #[test]
    fn inverse_branches_invert(x in -0.999..0.999f64) {
        let (z1, z2) = F.inverse_branches(CirclePoint::new(x).unwrap()).unwrap();
        prop_assert!(z1.coord() >= 0.0 && z2.coord() < 0.0);
        prop_assert!((F.eval(z1).coord() - x).abs() <= 4e-16);
        prop_assert!((F.eval(z2).coord() - x).abs() <= 4e-16);
    }

    #[test]
    fn derivative_matches_finite_differences(x in prop_oneof![0.01..0.99f64, -0.99..-0.01f64]) {
        let h = 1e-7 * x.abs();
        let fd = (F.eval(CirclePoint::new(x + h).unwrap()).coord() - F.eval(CirclePoint::new(x - h).unwrap()).coord()) / (2.0 * h);
        let analytic = (-F.log_inv_deriv_norm(CirclePoint::new(x).unwrap())).exp();
        prop_assert!((fd / analytic - 1.0).abs() <= 1e-6, "x = {}: {} vs {}", x, fd, analytic);
    }

    #[test]
    fn censoring_consistency(x in intermittent_point(), horizon in 1usize..300) {
        let p = HyperbolicParams::intermittent_default();
        let Ok(t) = generate_orbit(&F, x, horizon, p.delta()) else { return Ok(()) };
        let lazy = first_hyperbolic_time(&F, x, &p, horizon).unwrap();
        let stored = detect_fast(&t, &p).unwrap().first();
        prop_assert_eq!(lazy, stored);
        if let FirstTime::At(h) = lazy {
            prop_assert!(h <= horizon);
        }
    }

    #[test]
    fn first_times_partition_the_sample(seed in any::<u64>()) {
        let p = HyperbolicParams::intermittent_default();
        let traces: Vec<_> = EnsembleSpec::random(40, seed)
            .points()
            .into_iter()
            .filter_map(|x| generate_orbit(&F, x, 60, p.delta()).ok())
            .collect();
        prop_assume!(!traces.is_empty());
        let res: Vec<_> = traces.iter().map(|t| detect_fast(t, &p).unwrap()).collect();
        let s = classify_results(&res, 50);
        let total: f64 = s.h_star.iter().sum::<f64>() + s.censored_fraction;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(s.h.iter().zip(&s.h_star).all(|(h, hs)| hs <= h));
    }
}

#[test]
fn ensembles_and_detection_are_deterministic() {
    let p = HyperbolicParams::intermittent_default();
    let run = || {
        EnsembleSpec::random(30, 77)
            .points()
            .into_iter()
            .map(|x| generate_orbit(&F, x, 500, p.delta()).map(|t| detect_fast(&t, &p).unwrap()))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn doubling_law_is_degenerate() {
    let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
    for x in EnsembleSpec::random(100, 3).points() {
        assert_eq!(first_hyperbolic_time(&DoublingBaselineMap, x, &p, 5).unwrap(), FirstTime::At(1));
    }
}
