//! Backward contraction and bounded distortion at hyperbolic times.
//!
//! Pairs are built as small arcs around f^n(x) and pulled back through the
//! inverse branches along x's itinerary, so f^j y and f^j z follow the
//! branch of f^j x for every j < n. Gaps are propagated exactly by each
//! branch rather than recomputed as coordinate differences.

use serde::Serialize;

use crate::dynamics::MapSystem;
use crate::error::{Error, Result};
use crate::hyptimes::HyperbolicParams;
use crate::numeric::NeumaierSum;
use crate::orbits::OrbitTrace;

/// Radius of the arc around f^n(x) from which pairs are drawn.
pub const DEFAULT_ARC_RADIUS: f64 = 1e-6;

/// One pair (y, z = y - gap) pulled back from time n to time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPullback {
    /// gaps[k] = dist(f^{n-k} y, f^{n-k} z), k = 0..=n.
    pub gaps: Vec<f64>,
    /// log |(f^n)'(y)| - log |(f^n)'(z)|.
    pub log_det_diff: f64,
}

/// Pulls (y, y - gap) at time n back along the orbit stored in `trace`.
/// Returns `None` when the pair leaves a branch domain.
pub fn pull_back_pair(map: &dyn MapSystem, trace: &OrbitTrace, n: usize, y: f64, gap: f64) -> Option<PairPullback> {
    let pts = trace.points();
    let mut gaps = Vec::with_capacity(n + 1);
    gaps.push(gap);
    let (mut y, mut gap) = (y, gap);
    let mut log_det = NeumaierSum::new();
    for k in 1..=n {
        let (py, pg) = map.pull_back(pts[n - k], y, gap)?;
        y = py;
        gap = pg;
        gaps.push(gap);
        log_det.add(map.log_abs_det_gap(y, gap));
    }
    Some(PairPullback { gaps, log_det_diff: log_det.value() })
}

fn check_time(trace: &OrbitTrace, n: usize) -> Result<()> {
    if !trace.has_points() || n == 0 || n > trace.len() {
        return Err(Error::InvalidArgument(format!(
            "time {n} needs a stored orbit of length >= {n}"
        )));
    }
    Ok(())
}

/// Pairs symmetric about f^n(x) with half-widths radius·i/count, i = 1..=count.
fn pairs(trace: &OrbitTrace, n: usize, radius: f64, count: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    let c = trace.points()[n].coord();
    (1..=count).map(move |i| {
        let h = radius * i as f64 / count as f64;
        (c + h, 2.0 * h)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub n: usize,
    pub radius: f64,
    pub pairs_tested: usize,
    pub discarded: usize,
    /// Pairs with some k in 1..n violating the σ^{k/2} bound.
    pub violations: usize,
    /// max over pairs and k of gap_{n-k} / (σ^{k/2} gap_n).
    pub max_ratio: f64,
}

/// Checks dist(f^{n-k} y, f^{n-k} z) <= σ^{k/2} dist(f^n y, f^n z) for
/// 1 <= k < n on `pair_count` pulled-back pairs.
pub fn contraction_check(
    map: &dyn MapSystem,
    trace: &OrbitTrace,
    n: usize,
    params: &HyperbolicParams,
    pair_count: usize,
    radius: f64,
) -> Result<ContractionReport> {
    check_time(trace, n)?;
    let half_log_sigma = 0.5 * params.log_sigma();
    let mut report = ContractionReport { n, radius, pairs_tested: 0, discarded: 0, violations: 0, max_ratio: 0.0 };
    for (y, gap) in pairs(trace, n, radius, pair_count) {
        let Some(p) = pull_back_pair(map, trace, n, y, gap) else {
            report.discarded += 1;
            continue;
        };
        report.pairs_tested += 1;
        let mut violated = false;
        for k in 1..n {
            let bound = (half_log_sigma * k as f64).exp() * gap;
            violated |= p.gaps[k] > bound;
            report.max_ratio = report.max_ratio.max(p.gaps[k] / bound);
        }
        report.violations += violated as usize;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub n: usize,
    pub radius: f64,
    pub pairs_tested: usize,
    pub discarded: usize,
    /// sup over pairs of |log|(f^n)'(y)| - log|(f^n)'(z)||.
    pub log_sup: f64,
    /// exp(log_sup), the empirical distortion constant.
    pub c1: f64,
}

pub fn distortion_check(
    map: &dyn MapSystem,
    trace: &OrbitTrace,
    n: usize,
    pair_count: usize,
    radius: f64,
) -> Result<DistortionReport> {
    check_time(trace, n)?;
    let mut report = DistortionReport { n, radius, pairs_tested: 0, discarded: 0, log_sup: 0.0, c1: 1.0 };
    for (y, gap) in pairs(trace, n, radius, pair_count) {
        match pull_back_pair(map, trace, n, y, gap) {
            Some(p) => {
                report.pairs_tested += 1;
                report.log_sup = report.log_sup.max(p.log_det_diff.abs());
            }
            None => report.discarded += 1,
        }
    }
    report.c1 = report.log_sup.exp();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CirclePoint, DoublingBaselineMap, IntermittentCircleMap};
    use crate::hyptimes::detect_fast;
    use crate::orbits::generate_orbit;

    #[test]
    fn doubling_halves_gaps_exactly() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        let t = generate_orbit(&DoublingBaselineMap, CirclePoint::new(0.3).unwrap(), 20, 0.1).unwrap();
        let pb = pull_back_pair(&DoublingBaselineMap, &t, 20, t.points()[20].coord() + 1e-6, 2e-6).unwrap();
        for (k, g) in pb.gaps.iter().enumerate() {
            assert_eq!(*g, 2e-6 * 0.5f64.powi(k as i32));
        }
        let c = contraction_check(&DoublingBaselineMap, &t, 20, &p, 10, DEFAULT_ARC_RADIUS).unwrap();
        assert_eq!((c.violations, c.discarded, c.pairs_tested), (0, 0, 10));
        let d = distortion_check(&DoublingBaselineMap, &t, 20, 10, DEFAULT_ARC_RADIUS).unwrap();
        assert_eq!(d.c1, 1.0);
    }

    #[test]
    fn pullback_tracks_the_orbit() {
        let f = IntermittentCircleMap;
        let t = generate_orbit(&f, CirclePoint::new(0.437).unwrap(), 30, 0.5).unwrap();
        let c = t.points()[30].coord();
        let pb = pull_back_pair(&f, &t, 30, c + 1e-9, 2e-9).unwrap();
        assert_eq!(pb.gaps.len(), 31);
        assert!(pb.gaps.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn degenerate_pair() {
        let f = IntermittentCircleMap;
        let t = generate_orbit(&f, CirclePoint::new(0.437).unwrap(), 10, 0.5).unwrap();
        let pb = pull_back_pair(&f, &t, 10, t.points()[10].coord(), 0.0).unwrap();
        assert!(pb.gaps.iter().all(|&g| g == 0.0));
        assert_eq!(pb.log_det_diff, 0.0);
    }

    #[test]
    fn intermittent_times_contract() {
        let f = IntermittentCircleMap;
        let p = HyperbolicParams::intermittent_default();
        let t = generate_orbit(&f, CirclePoint::new(0.6180339).unwrap(), 400, p.delta()).unwrap();
        let res = detect_fast(&t, &p).unwrap();
        assert!(!res.times().is_empty());
        for &n in res.times().iter().take(20) {
            let c = contraction_check(&f, &t, n, &p, 10, DEFAULT_ARC_RADIUS).unwrap();
            assert_eq!(c.violations, 0, "{c:?}");
            let d = distortion_check(&f, &t, n, 10, DEFAULT_ARC_RADIUS).unwrap();
            assert!(d.c1 < 1.1, "{d:?}");
        }
        assert!(contraction_check(&f, &t, 401, &p, 10, DEFAULT_ARC_RADIUS).is_err());
    }
}
